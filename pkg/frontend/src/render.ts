// Frame construction and canvas painting. `frameModel` computes what to
// draw (pure, testable); `paintFrame` rasterizes it.

import { Role } from "./protocol.js";
import { laneY, signalToX, Viewport } from "./viewport.js";

export const TARGET_COLORS = ["#2e9e4f", "#d8c029", "#e075b4"]; // green, yellow, pink
export const CURSOR_COLOR = "#d33"; // red
export const TARGET_COLOR_OPERATOR = "#fff"; // the operator's target stays white
export const KEY_LEGEND = "1 - green   2 - yellow   3 - pink";

export interface Glyph {
  kind: "target" | "cursor" | "command";
  x: number;
  y: number;
  color: string;
  highlighted?: boolean;
}

export interface FrameModel {
  glyphs: Glyph[];
  legend: string | null;
  selection: number;
}

/**
 * Build the glyph list for one frame from interpolated tick values.
 * Operator frames carry exactly one white target plus the cursor; supervisor
 * frames carry the three colored targets, the cursor, the current selection
 * highlight, and the command marker when the condition grants it.
 */
export function frameModel(
  role: Role,
  view: Viewport,
  values: Record<string, number>,
  selection: number,
): FrameModel {
  const glyphs: Glyph[] = [];
  if (role === "operator") {
    glyphs.push({
      kind: "target",
      x: signalToX(view, values.target ?? 0),
      y: laneY(view, 0, 2),
      color: TARGET_COLOR_OPERATOR,
    });
    glyphs.push({
      kind: "cursor",
      x: signalToX(view, values.y ?? 0),
      y: laneY(view, 1, 2),
      color: CURSOR_COLOR,
    });
    return { glyphs, legend: null, selection: 0 };
  }

  const lanes = values.u !== undefined ? 5 : 4;
  for (let i = 0; i < 3; i++) {
    glyphs.push({
      kind: "target",
      x: signalToX(view, values[`r${i + 1}`] ?? 0),
      y: laneY(view, i, lanes),
      color: TARGET_COLORS[i],
      highlighted: selection === i + 1,
    });
  }
  glyphs.push({
    kind: "cursor",
    x: signalToX(view, values.y ?? 0),
    y: laneY(view, 3, lanes),
    color: CURSOR_COLOR,
  });
  if (values.u !== undefined) {
    glyphs.push({
      kind: "command",
      x: signalToX(view, values.u / 10),
      y: laneY(view, 4, lanes),
      color: "#7ab0e0",
    });
  }
  return { glyphs, legend: KEY_LEGEND, selection };
}

export function paintFrame(
  ctx: CanvasRenderingContext2D,
  view: Viewport,
  model: FrameModel,
): void {
  ctx.fillStyle = "#15181d";
  ctx.fillRect(0, 0, view.width, view.height);
  for (const glyph of model.glyphs) {
    ctx.beginPath();
    if (glyph.kind === "cursor") {
      ctx.fillStyle = glyph.color;
      ctx.fillRect(glyph.x - 3, glyph.y - 14, 6, 28);
    } else if (glyph.kind === "command") {
      ctx.strokeStyle = glyph.color;
      ctx.lineWidth = 2;
      ctx.moveTo(glyph.x, glyph.y - 10);
      ctx.lineTo(glyph.x, glyph.y + 10);
      ctx.stroke();
    } else {
      ctx.fillStyle = glyph.color;
      ctx.arc(glyph.x, glyph.y, 10, 0, 2 * Math.PI);
      ctx.fill();
      if (glyph.highlighted) {
        ctx.strokeStyle = "#fff";
        ctx.lineWidth = 2;
        ctx.beginPath();
        ctx.arc(glyph.x, glyph.y, 14, 0, 2 * Math.PI);
        ctx.stroke();
      }
    }
  }
  if (model.legend) {
    ctx.fillStyle = "#aab";
    ctx.font = "14px system-ui, sans-serif";
    ctx.fillText(model.legend, 12, view.height - 12);
  }
}
