/** HTTP Range parsing for audio scrubbing. Single byte ranges only, which is
 * what <audio> elements send. */

export interface ByteRange {
  start: number;
  end: number; // inclusive
}

export function parseRange(header: string | undefined,
                           size: number): ByteRange | "invalid" | null {
  if (!header) return null;
  const m = /^bytes=(\d*)-(\d*)$/.exec(header.trim());
  if (!m || (m[1] === "" && m[2] === "")) return "invalid";
  if (m[1] === "") {
    // suffix form: last N bytes
    const n = parseInt(m[2], 10);
    if (n === 0) return "invalid";
    return { start: Math.max(0, size - n), end: size - 1 };
  }
  const start = parseInt(m[1], 10);
  const end = m[2] === "" ? size - 1 : parseInt(m[2], 10);
  if (start >= size || end < start) return "invalid";
  return { start, end: Math.min(end, size - 1) };
}
