// Live force trace: fz against time with the contact threshold drawn in.
// Geometry is computed separately from canvas work so it stays testable
// in DOM-less environments (jsdom has no 2D context).

import type { FtPoint } from './viewmodel.js';

export interface ChartGeometry {
  // Polyline in unit coordinates (x: 0..1 left to right, y: 0..1 top to bottom).
  points: Array<{ x: number; y: number; touched: boolean }>;
  thresholdY: number; // y of the -threshold line (pokes push fz negative)
  zeroY: number;
  fzMin: number;
  fzMax: number;
}

export function computeGeometry(trace: FtPoint[], threshold: number): ChartGeometry {
  // Scale covers the threshold band plus whatever the data reaches.
  let fzMin = -Math.max(threshold * 2, 0.1);
  let fzMax = Math.max(threshold / 2, 0.05);
  for (const p of trace) {
    if (p.fz < fzMin) fzMin = p.fz;
    if (p.fz > fzMax) fzMax = p.fz;
  }
  const span = fzMax - fzMin;
  const yOf = (fz: number) => (fzMax - fz) / span;

  const n = trace.length;
  const points = trace.map((p, i) => ({
    x: n > 1 ? i / (n - 1) : 0.5,
    y: yOf(p.fz),
    touched: p.touched,
  }));
  return {
    points,
    thresholdY: yOf(-threshold),
    zeroY: yOf(0),
    fzMin,
    fzMax,
  };
}

export function drawChart(canvas: HTMLCanvasElement, trace: FtPoint[], threshold: number): void {
  const ctx = canvas.getContext ? canvas.getContext('2d') : null;
  if (!ctx) return; // headless test environment
  const { width: w, height: h } = canvas;
  const geometry = computeGeometry(trace, threshold);

  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = '#10151c';
  ctx.fillRect(0, 0, w, h);

  ctx.strokeStyle = '#3a4656';
  ctx.setLineDash([]);
  ctx.beginPath();
  ctx.moveTo(0, geometry.zeroY * h);
  ctx.lineTo(w, geometry.zeroY * h);
  ctx.stroke();

  ctx.strokeStyle = '#e05555';
  ctx.setLineDash([5, 4]);
  ctx.beginPath();
  ctx.moveTo(0, geometry.thresholdY * h);
  ctx.lineTo(w, geometry.thresholdY * h);
  ctx.stroke();
  ctx.setLineDash([]);

  if (geometry.points.length > 1) {
    ctx.strokeStyle = '#5ad1a5';
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    geometry.points.forEach((p, i) => {
      if (i === 0) ctx.moveTo(p.x * w, p.y * h);
      else ctx.lineTo(p.x * w, p.y * h);
    });
    ctx.stroke();
  }
}
