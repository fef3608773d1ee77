// Orientation math mirroring the server convention: intrinsic Z (yaw) then
// Y (pitch) rotation, Hamilton quaternion [w, x, y, z].

export function yawPitchToQuaternion(yawDeg: number, pitchDeg: number): [number, number, number, number] {
  const hy = (yawDeg * Math.PI) / 360;
  const hp = (pitchDeg * Math.PI) / 360;
  const n = (v: number) => (v === 0 ? 0 : v); // avoid -0 components
  // q = qz(yaw) * qy(pitch)
  const w = Math.cos(hy) * Math.cos(hp);
  const x = -Math.sin(hy) * Math.sin(hp);
  const y = Math.cos(hy) * Math.sin(hp);
  const z = Math.sin(hy) * Math.cos(hp);
  return [n(w), n(x), n(y), n(z)];
}

export function clamp(v: number, lo: number, hi: number): number {
  return Math.min(Math.max(v, lo), hi);
}
