/** Top-down canvas rendering of the latest server frame: lane edges,
 * centerline, vehicle triangle, the 9 rangefinder rays, green-dot target,
 * reward gauge, and the recording indicator. Pure drawing — no client-side
 * physics or prediction.
 */

import { StateFrame } from "./protocol.js";
import {
  BOUNDS_H,
  BOUNDS_W,
  Point,
  centerline,
  innerEdge,
  outerEdge,
} from "./trackGeometry.js";

export const RAY_MAX_RANGE = 0.5;
const RAY_ANGLES = Array.from({ length: 9 }, (_, i) => (-90 + 22.5 * i) * (Math.PI / 180));
const MARGIN_PX = 20;

export interface Transform {
  scale: number;
  toCanvas(p: Point): Point;
}

/** World (meters, y up) to canvas (pixels, y down) mapping that fits the
 * track bounds with a margin. */
export function makeTransform(canvasW: number, canvasH: number): Transform {
  const scale = Math.min(
    (canvasW - 2 * MARGIN_PX) / BOUNDS_W,
    (canvasH - 2 * MARGIN_PX) / BOUNDS_H,
  );
  const ox = (canvasW - BOUNDS_W * scale) / 2;
  const oy = (canvasH - BOUNDS_H * scale) / 2;
  return {
    scale,
    toCanvas: ([x, y]) => [ox + x * scale, canvasH - (oy + y * scale)],
  };
}

function drawLoop(
  ctx: CanvasRenderingContext2D,
  tf: Transform,
  pts: Point[],
  style: string,
  width: number,
  dash: number[] = [],
): void {
  ctx.save();
  ctx.strokeStyle = style;
  ctx.lineWidth = width;
  ctx.setLineDash(dash);
  ctx.beginPath();
  pts.forEach((p, i) => {
    const [cx, cy] = tf.toCanvas(p);
    if (i === 0) ctx.moveTo(cx, cy);
    else ctx.lineTo(cx, cy);
  });
  ctx.closePath();
  ctx.stroke();
  ctx.restore();
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  canvasW: number,
  canvasH: number,
  frame: StateFrame | null,
  status: string,
): void {
  const tf = makeTransform(canvasW, canvasH);
  ctx.clearRect(0, 0, canvasW, canvasH);
  ctx.fillStyle = "#101418";
  ctx.fillRect(0, 0, canvasW, canvasH);

  drawLoop(ctx, tf, outerEdge(), "#d0d4d8", 2);
  drawLoop(ctx, tf, innerEdge(), "#d0d4d8", 2);
  drawLoop(ctx, tf, centerline(), "#4a5560", 1, [6, 6]);

  ctx.fillStyle = "#9aa4ae";
  ctx.font = "13px sans-serif";
  ctx.fillText(status, 12, canvasH - 10);

  if (frame === null) return;
  const [x, y, heading] = frame.pose;
  const pos = tf.toCanvas([x, y]);

  // Rays, drawn from the vehicle at their actual hit lengths.
  ctx.save();
  ctx.strokeStyle = "rgba(120, 200, 255, 0.5)";
  ctx.lineWidth = 1;
  frame.rays.forEach((r, i) => {
    const a = heading + RAY_ANGLES[i];
    const d = r * RAY_MAX_RANGE;
    const end = tf.toCanvas([x + d * Math.cos(a), y + d * Math.sin(a)]);
    ctx.beginPath();
    ctx.moveTo(pos[0], pos[1]);
    ctx.lineTo(end[0], end[1]);
    ctx.stroke();
  });
  ctx.restore();

  // Green-dot steering target.
  const dot = tf.toCanvas(frame.green_dot);
  ctx.fillStyle = "#3ddc64";
  ctx.beginPath();
  ctx.arc(dot[0], dot[1], 4, 0, 2 * Math.PI);
  ctx.fill();

  // Vehicle pose triangle.
  ctx.save();
  ctx.translate(pos[0], pos[1]);
  ctx.rotate(-heading); // canvas y is flipped
  ctx.fillStyle = "#ffb454";
  ctx.beginPath();
  const size = 0.06 * tf.scale;
  ctx.moveTo(size, 0);
  ctx.lineTo(-size * 0.6, size * 0.5);
  ctx.lineTo(-size * 0.6, -size * 0.5);
  ctx.closePath();
  ctx.fill();
  ctx.restore();

  // Reward gauge (0..1).
  const gaugeW = 160;
  ctx.fillStyle = "#2a3138";
  ctx.fillRect(12, 12, gaugeW, 12);
  ctx.fillStyle = frame.reward >= 0.9 ? "#3ddc64" : "#ffb454";
  ctx.fillRect(12, 12, gaugeW * Math.max(0, Math.min(1, frame.reward)), 12);
  ctx.strokeStyle = "#9aa4ae";
  ctx.strokeRect(12, 12, gaugeW, 12);
  ctx.fillStyle = "#d0d4d8";
  ctx.fillText(`reward ${frame.reward.toFixed(2)}`, 12 + gaugeW + 8, 22);

  // Recording indicator + sample counter.
  if (frame.recording) {
    ctx.fillStyle = "#ff4545";
    ctx.beginPath();
    ctx.arc(20, 44, 6, 0, 2 * Math.PI);
    ctx.fill();
  }
  ctx.fillStyle = "#d0d4d8";
  ctx.fillText(
    `${frame.recording ? "REC" : "idle"}  samples ${frame.sample_count}  t ${frame.t.toFixed(1)} s`,
    32,
    48,
  );
}
