/**
 * Software raster backend implementing the same Draw interface as the SVG
 * writer, plus a dependency-free PNG encoder (zlib IDAT, filter 0).
 * Text uses a classic 5x7 bitmap font (column-major, bit 0 = top row),
 * uppercased; it exists so PNG output is self-contained, not pretty.
 */

import * as zlib from "node:zlib";

import type { Draw, Style, TextStyle } from "./chart.js";

const FONT: Record<string, number[]> = {
  " ": [0x00, 0x00, 0x00, 0x00, 0x00],
  "%": [0x23, 0x13, 0x08, 0x64, 0x62],
  "(": [0x00, 0x1c, 0x22, 0x41, 0x00],
  ")": [0x00, 0x41, 0x22, 0x1c, 0x00],
  "+": [0x08, 0x08, 0x3e, 0x08, 0x08],
  ",": [0x00, 0x50, 0x30, 0x00, 0x00],
  "-": [0x08, 0x08, 0x08, 0x08, 0x08],
  ".": [0x00, 0x60, 0x60, 0x00, 0x00],
  "/": [0x20, 0x10, 0x08, 0x04, 0x02],
  "0": [0x3e, 0x51, 0x49, 0x45, 0x3e],
  "1": [0x00, 0x42, 0x7f, 0x40, 0x00],
  "2": [0x42, 0x61, 0x51, 0x49, 0x46],
  "3": [0x21, 0x41, 0x45, 0x4b, 0x31],
  "4": [0x18, 0x14, 0x12, 0x7f, 0x10],
  "5": [0x27, 0x45, 0x45, 0x45, 0x39],
  "6": [0x3c, 0x4a, 0x49, 0x49, 0x30],
  "7": [0x01, 0x71, 0x09, 0x05, 0x03],
  "8": [0x36, 0x49, 0x49, 0x49, 0x36],
  "9": [0x06, 0x49, 0x49, 0x29, 0x1e],
  ":": [0x00, 0x36, 0x36, 0x00, 0x00],
  "=": [0x14, 0x14, 0x14, 0x14, 0x14],
  "[": [0x00, 0x7f, 0x41, 0x41, 0x00],
  "]": [0x00, 0x41, 0x41, 0x7f, 0x00],
  A: [0x7e, 0x11, 0x11, 0x11, 0x7e],
  B: [0x7f, 0x49, 0x49, 0x49, 0x36],
  C: [0x3e, 0x41, 0x41, 0x41, 0x22],
  D: [0x7f, 0x41, 0x41, 0x22, 0x1c],
  E: [0x7f, 0x49, 0x49, 0x49, 0x41],
  F: [0x7f, 0x09, 0x09, 0x09, 0x01],
  G: [0x3e, 0x41, 0x49, 0x49, 0x7a],
  H: [0x7f, 0x08, 0x08, 0x08, 0x7f],
  I: [0x00, 0x41, 0x7f, 0x41, 0x00],
  J: [0x20, 0x40, 0x41, 0x3f, 0x01],
  K: [0x7f, 0x08, 0x14, 0x22, 0x41],
  L: [0x7f, 0x40, 0x40, 0x40, 0x40],
  M: [0x7f, 0x02, 0x0c, 0x02, 0x7f],
  N: [0x7f, 0x04, 0x08, 0x10, 0x7f],
  O: [0x3e, 0x41, 0x41, 0x41, 0x3e],
  P: [0x7f, 0x09, 0x09, 0x09, 0x06],
  Q: [0x3e, 0x41, 0x51, 0x21, 0x5e],
  R: [0x7f, 0x09, 0x19, 0x29, 0x46],
  S: [0x46, 0x49, 0x49, 0x49, 0x31],
  T: [0x01, 0x01, 0x7f, 0x01, 0x01],
  U: [0x3f, 0x40, 0x40, 0x40, 0x3f],
  V: [0x1f, 0x20, 0x40, 0x20, 0x1f],
  W: [0x3f, 0x40, 0x38, 0x40, 0x3f],
  X: [0x63, 0x14, 0x08, 0x14, 0x63],
  Y: [0x07, 0x08, 0x70, 0x08, 0x07],
  Z: [0x61, 0x51, 0x49, 0x45, 0x43],
};

function parseColor(c: string): [number, number, number] {
  const m = /^#([0-9a-f]{6})$/i.exec(c);
  if (!m) return [34, 34, 34];
  const v = parseInt(m[1], 16);
  return [(v >> 16) & 0xff, (v >> 8) & 0xff, v & 0xff];
}

export class RasterDraw implements Draw {
  private buf: Uint8Array;

  constructor(public readonly width: number, public readonly height: number) {
    this.buf = new Uint8Array(width * height * 3).fill(255);
  }

  private put(x: number, y: number, rgb: [number, number, number], alpha = 1): void {
    const xi = Math.round(x);
    const yi = Math.round(y);
    if (xi < 0 || yi < 0 || xi >= this.width || yi >= this.height) return;
    const i = (yi * this.width + xi) * 3;
    for (let c = 0; c < 3; c++) {
      this.buf[i + c] = Math.round(this.buf[i + c] * (1 - alpha) + rgb[c] * alpha);
    }
  }

  private stamp(x: number, y: number, rgb: [number, number, number], w: number, alpha: number): void {
    const r = Math.max(0, Math.floor(w / 2));
    for (let dy = -r; dy <= r; dy++) {
      for (let dx = -r; dx <= r; dx++) {
        this.put(x + dx, y + dy, rgb, alpha);
      }
    }
  }

  private segment(
    x1: number, y1: number, x2: number, y2: number,
    rgb: [number, number, number], w: number, alpha: number,
    dash?: number[], dashState = { pos: 0 }
  ): void {
    const len = Math.hypot(x2 - x1, y2 - y1);
    const steps = Math.max(1, Math.ceil(len));
    const period = dash && dash.length ? dash.reduce((a, b) => a + b, 0) : 0;
    for (let i = 0; i <= steps; i++) {
      const t = i / steps;
      if (period > 0) {
        const phase = (dashState.pos + t * len) % period;
        let acc = 0;
        let drawn = true;
        for (let k = 0; k < dash!.length; k++) {
          acc += dash![k];
          if (phase < acc) {
            drawn = k % 2 === 0;
            break;
          }
        }
        if (!drawn) continue;
      }
      this.stamp(x1 + (x2 - x1) * t, y1 + (y2 - y1) * t, rgb, w, alpha);
    }
    dashState.pos += len;
  }

  polyline(pts: Array<[number, number]>, s: Style): void {
    if (pts.length < 2 || !s.stroke) return;
    const rgb = parseColor(s.stroke);
    const alpha = s.opacity ?? 1;
    const state = { pos: 0 };
    for (let i = 1; i < pts.length; i++) {
      this.segment(
        pts[i - 1][0], pts[i - 1][1], pts[i][0], pts[i][1],
        rgb, s.width ?? 1, alpha, s.dash, state
      );
    }
  }

  circle(x: number, y: number, r: number, s: Style): void {
    const alpha = s.opacity ?? 1;
    if (s.fill && s.fill !== "none") {
      const rgb = parseColor(s.fill);
      for (let dy = -r; dy <= r; dy++) {
        for (let dx = -r; dx <= r; dx++) {
          if (dx * dx + dy * dy <= r * r) this.put(x + dx, y + dy, rgb, alpha);
        }
      }
    }
    if (s.stroke) {
      const rgb = parseColor(s.stroke);
      const steps = Math.max(12, Math.ceil(2 * Math.PI * r));
      for (let i = 0; i < steps; i++) {
        const a = (2 * Math.PI * i) / steps;
        this.stamp(x + r * Math.cos(a), y + r * Math.sin(a), rgb, s.width ?? 1, alpha);
      }
    }
  }

  rect(x: number, y: number, w: number, h: number, s: Style): void {
    const alpha = s.opacity ?? 1;
    if (s.fill && s.fill !== "none") {
      const rgb = parseColor(s.fill);
      for (let yy = y; yy < y + h; yy++) {
        for (let xx = x; xx < x + w; xx++) this.put(xx, yy, rgb, alpha);
      }
    }
    if (s.stroke) {
      const rgb = parseColor(s.stroke);
      const lw = s.width ?? 1;
      const st = { pos: 0 };
      this.segment(x, y, x + w, y, rgb, lw, alpha, s.dash, st);
      this.segment(x + w, y, x + w, y + h, rgb, lw, alpha, s.dash, st);
      this.segment(x + w, y + h, x, y + h, rgb, lw, alpha, s.dash, st);
      this.segment(x, y + h, x, y, rgb, lw, alpha, s.dash, st);
    }
  }

  text(x: number, y: number, str: string, t: TextStyle = {}): void {
    const rgb = parseColor(t.color ?? "#222222");
    const scale = Math.max(1, Math.round((t.size ?? 11) / 9));
    const glyphW = 6 * scale;
    const total = str.length * glyphW;
    let ox = x;
    if ((t.anchor ?? "start") === "middle") ox -= total / 2;
    if (t.anchor === "end") ox -= total;
    const baseY = y - 7 * scale + scale; // baseline-ish alignment
    for (let ci = 0; ci < str.length; ci++) {
      const glyph = FONT[str[ci].toUpperCase()] ?? FONT["."];
      for (let col = 0; col < 5; col++) {
        const bits = glyph[col];
        for (let row = 0; row < 7; row++) {
          if ((bits >> row) & 1) {
            for (let sy = 0; sy < scale; sy++) {
              for (let sx = 0; sx < scale; sx++) {
                const gx = ci * glyphW + col * scale + sx;
                const gy = row * scale + sy;
                if (t.rotate === -90) {
                  this.put(x + gy - 3 * scale, y - (ox - x) - gx, rgb);
                } else {
                  this.put(ox + gx, baseY + gy, rgb);
                }
              }
            }
          }
        }
      }
    }
  }

  toPng(): Buffer {
    const raw = Buffer.alloc(this.height * (1 + this.width * 3));
    for (let y = 0; y < this.height; y++) {
      raw[y * (1 + this.width * 3)] = 0; // filter: none
      Buffer.from(
        this.buf.buffer, y * this.width * 3, this.width * 3
      ).copy(raw, y * (1 + this.width * 3) + 1);
    }
    const idat = zlib.deflateSync(raw, { level: 6 });
    const ihdr = Buffer.alloc(13);
    ihdr.writeUInt32BE(this.width, 0);
    ihdr.writeUInt32BE(this.height, 4);
    ihdr[8] = 8;  // bit depth
    ihdr[9] = 2;  // color type: truecolor
    return Buffer.concat([
      Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]),
      chunk("IHDR", ihdr),
      chunk("IDAT", idat),
      chunk("IEND", Buffer.alloc(0)),
    ]);
  }
}

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(buf: Buffer): number {
  let c = 0xffffffff;
  for (const b of buf) c = CRC_TABLE[(c ^ b) & 0xff] ^ (c >>> 8);
  return (c ^ 0xffffffff) >>> 0;
}

function chunk(type: string, data: Buffer): Buffer {
  const len = Buffer.alloc(4);
  len.writeUInt32BE(data.length, 0);
  const body = Buffer.concat([Buffer.from(type, "ascii"), data]);
  const crc = Buffer.alloc(4);
  crc.writeUInt32BE(crc32(body), 0);
  return Buffer.concat([len, body, crc]);
}
