// Message types for the teleoperation WebSocket protocol, plus a small
// validator over the shared protocol.schema.json document.  The console
// refuses to send anything the schema rejects.

export type HelloMsg = { type: "hello"; role: "operator" | "viewer"; proto: 1 };
export type PoseMsg = { type: "pose"; q: [number, number, number, number]; t_ms: number };
export type ZoomStepMsg = { type: "zoom"; mode: "step"; dir: -1 | 1 };
export type ZoomRateMsg = { type: "zoom"; mode: "rate"; v: number };
export type RecordMsg = { type: "record"; action: "start" | "stop"; name?: string };
export type InboundMsg = HelloMsg | PoseMsg | ZoomStepMsg | ZoomRateMsg | RecordMsg;

export type StateMsg = {
  type: "state";
  pan: number;
  tilt: number;
  zoom: number;
  focal_mm: number;
  seq: number;
  recording?: boolean;
};
export type FrameMsg = { type: "frame"; seq: number; encoding: "png_b64"; data: string };
export type ErrorMsg = { type: "error"; code: string; msg: string };
export type OutboundMsg = StateMsg | FrameMsg | ErrorMsg;

export interface JsonSchema {
  $defs?: Record<string, JsonSchema>;
  $ref?: string;
  type?: string;
  const?: unknown;
  enum?: unknown[];
  properties?: Record<string, JsonSchema>;
  required?: string[];
  items?: JsonSchema;
  minItems?: number;
  maxItems?: number;
  minimum?: number;
  maximum?: number;
  pattern?: string;
  oneOf?: JsonSchema[];
}

function typeOf(value: unknown): string {
  if (value === null) return "null";
  if (Array.isArray(value)) return "array";
  if (typeof value === "number") return Number.isInteger(value) ? "integer" : "number";
  return typeof value;
}

function check(value: unknown, schema: JsonSchema, root: JsonSchema): boolean {
  if (schema.$ref) {
    const name = schema.$ref.replace("#/$defs/", "");
    const target = root.$defs?.[name];
    return target ? check(value, target, root) : false;
  }
  if (schema.oneOf) {
    return schema.oneOf.filter((s) => check(value, s, root)).length === 1;
  }
  if (schema.const !== undefined && value !== schema.const) return false;
  if (schema.enum && !schema.enum.some((e) => e === value)) return false;
  if (schema.type) {
    const t = typeOf(value);
    if (schema.type === "number") {
      if (t !== "number" && t !== "integer") return false;
    } else if (schema.type === "integer") {
      if (t !== "integer") return false;
    } else if (schema.type !== t) {
      return false;
    }
  }
  if (typeof value === "number") {
    if (!Number.isFinite(value)) return false;
    if (schema.minimum !== undefined && value < schema.minimum) return false;
    if (schema.maximum !== undefined && value > schema.maximum) return false;
  }
  if (typeof value === "string" && schema.pattern) {
    if (!new RegExp(schema.pattern).test(value)) return false;
  }
  if (Array.isArray(value)) {
    if (schema.minItems !== undefined && value.length < schema.minItems) return false;
    if (schema.maxItems !== undefined && value.length > schema.maxItems) return false;
    if (schema.items && !value.every((v) => check(v, schema.items as JsonSchema, root))) return false;
  }
  if (schema.properties && typeof value === "object" && value !== null && !Array.isArray(value)) {
    const obj = value as Record<string, unknown>;
    for (const key of schema.required ?? []) {
      if (!(key in obj)) return false;
    }
    for (const [key, sub] of Object.entries(schema.properties)) {
      if (key in obj && !check(obj[key], sub, root)) return false;
    }
  }
  return true;
}

export class ProtocolValidator {
  constructor(private readonly schema: JsonSchema) {
    if (!schema.$defs) throw new Error("protocol schema has no $defs");
  }

  validate(msg: unknown, def: "inbound" | "outbound" = "inbound"): boolean {
    return check(msg, { $ref: `#/$defs/${def}` }, this.schema);
  }
}

export async function fetchValidator(baseUrl: string): Promise<ProtocolValidator> {
  const resp = await fetch(new URL("/protocol.schema.json", baseUrl));
  if (!resp.ok) throw new Error(`schema fetch failed: ${resp.status}`);
  return new ProtocolValidator((await resp.json()) as JsonSchema);
}
