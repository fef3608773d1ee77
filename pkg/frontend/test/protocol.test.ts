import { describe, expect, it } from "vitest";

import { loadValidator } from "./helpers.js";

const v = loadValidator();

describe("protocol validator over the shared schema", () => {
  it("accepts every well-formed inbound message", () => {
    expect(v.validate({ type: "hello", role: "operator", proto: 1 })).toBe(true);
    expect(v.validate({ type: "pose", q: [1, 0, 0, 0], t_ms: 5 })).toBe(true);
    expect(v.validate({ type: "zoom", mode: "step", dir: -1 })).toBe(true);
    expect(v.validate({ type: "zoom", mode: "rate", v: 1.5 })).toBe(true);
    expect(v.validate({ type: "record", action: "start", name: "ep_1" })).toBe(true);
    expect(v.validate({ type: "record", action: "stop" })).toBe(true);
  });

  it("rejects malformed inbound messages", () => {
    expect(v.validate({ type: "pose", q: [1, 0, 0], t_ms: 5 })).toBe(false);
    expect(v.validate({ type: "pose", q: [1, 0, 0, 0], t_ms: -2 })).toBe(false);
    expect(v.validate({ type: "zoom", mode: "step", dir: 2 })).toBe(false);
    expect(v.validate({ type: "zoom", mode: "rate", v: 4.0 })).toBe(false);
    expect(v.validate({ type: "record", action: "start", name: "../evil" })).toBe(false);
    expect(v.validate({ type: "hello", role: "root", proto: 1 })).toBe(false);
    expect(v.validate({ type: "teleport" })).toBe(false);
    expect(v.validate("pose")).toBe(false);
  });

  it("validates outbound messages too", () => {
    expect(
      v.validate(
        { type: "state", pan: 0, tilt: 0, zoom: 1, focal_mm: 4.8, seq: 1 },
        "outbound",
      ),
    ).toBe(true);
    expect(
      v.validate({ type: "frame", seq: 0, encoding: "png_b64", data: "aGk=" }, "outbound"),
    ).toBe(true);
    expect(v.validate({ type: "state", pan: 0 }, "outbound")).toBe(false);
  });
});
