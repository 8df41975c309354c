import init, { rateCurves, thresholdSweep, simulateTrace } from "./pkg/brq_wasm.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

const num = (id) => Number(document.getElementById(id).value);

// series: [{ name, xs, ys }], ys may hold nulls for gaps
function plot(canvasId, legendId, series, xLabel) {
  const canvas = document.getElementById(canvasId);
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 44;
  ctx.clearRect(0, 0, w, h);

  const xs = series.flatMap((s) => s.xs);
  const ys = series.flatMap((s) => s.ys).filter((y) => y !== null && Number.isFinite(y));
  const x0 = Math.min(...xs), x1 = Math.max(...xs);
  const y0 = Math.min(0, ...ys), y1 = Math.max(...ys) || 1;
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const sy = (y) => h - pad - ((y - y0) / (y1 - y0 || 1)) * (h - 2 * pad);

  ctx.strokeStyle = "#888";
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.beginPath();
  ctx.moveTo(pad, pad / 2);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad / 2, h - pad);
  ctx.stroke();
  for (let i = 0; i <= 5; i++) {
    const xv = x0 + ((x1 - x0) * i) / 5, yv = y0 + ((y1 - y0) * i) / 5;
    ctx.fillText(xv.toPrecision(3), sx(xv) - 10, h - pad + 14);
    ctx.fillText(yv.toPrecision(3), 2, sy(yv) + 4);
  }
  ctx.fillText(xLabel, w / 2, h - 6);

  const legend = document.getElementById(legendId);
  legend.innerHTML = "";
  series.forEach((s, i) => {
    const color = COLORS[i % COLORS.length];
    ctx.strokeStyle = color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    let pen = false;
    s.xs.forEach((x, j) => {
      const y = s.ys[j];
      if (y === null || !Number.isFinite(y)) { pen = false; return; }
      if (pen) ctx.lineTo(sx(x), sy(y)); else ctx.moveTo(sx(x), sy(y));
      pen = true;
    });
    ctx.stroke();
    const tag = document.createElement("span");
    tag.style.color = color;
    tag.textContent = "■ " + s.name;
    legend.appendChild(tag);
  });
}

function guarded(errId, fn) {
  return () => {
    const err = document.getElementById(errId);
    err.textContent = "";
    try { fn(); } catch (e) { err.textContent = String(e.message ?? e); }
  };
}

function drawCurves() {
  const f = num("c-f");
  const d = JSON.parse(rateCurves(num("c-start"), num("c-stop"), num("c-step"), num("c-k"), f));
  const xs = d.mean_snr_db;
  plot("c-plot", "c-legend", [
    { name: "water-filling", xs, ys: d.waterfilling },
    { name: "prior CSIT, fixed power", xs, ys: d.prior_fixed },
    { name: "BRQ full CSIT", xs, ys: d.brq_full },
    { name: `BRQ F=${f}`, xs, ys: d.brq_quantized },
  ], "mean SNR (dB)");
}

function drawRatio() {
  const fs = document.getElementById("r-f").value.split(",").map(Number).filter((v) => v > 0);
  const d = JSON.parse(thresholdSweep(num("r-snr"), num("r-stop"), num("r-step"), new Float64Array(fs)));
  const xs = d.ratio;
  plot("r-plot", "r-legend", [
    { name: "BRQ full CSIT", xs, ys: d.brq_full },
    ...d.quantized.map((q) => ({ name: `BRQ F=${q.feedback_bits}`, xs, ys: q.values })),
  ], "threshold / mean SNR");
}

function drawSim() {
  const d = JSON.parse(simulateTrace(num("s-snr"), num("s-k"), num("s-slots"), num("s-seed"), num("s-f"), num("s-l")));
  const xs = d.cumulative_brq.map((_, i) => i + 1);
  plot("s-plot", "s-legend", [
    { name: "bits credited by renewals", xs, ys: d.cumulative_brq },
    { name: "N min(C, R) on the same trace", xs, ys: d.cumulative_limited },
  ], "slot");
  document.getElementById("sim-summary").textContent =
    `R = ${d.rate.toFixed(4)}  simulated rate = ${d.delivered_rate.toFixed(4)}  ` +
    `analytic full-CSIT rate = ${d.analytic_full.toFixed(4)}  ` +
    (d.analytic_quantized === null ? "" : `analytic quantized rate = ${d.analytic_quantized.toFixed(4)}  `) +
    `renewals = ${d.renewals}  ` +
    `undelivered bits = ${d.undelivered_bits.toFixed(1)}  integrity = ${d.integrity_ok ? "ok" : "broken"}`;
}

await init();
const bind = (btn, errId, fn) => {
  const run = guarded(errId, fn);
  document.getElementById(btn).addEventListener("click", run);
  run();
};
bind("c-run", "c-err", drawCurves);
bind("r-run", "r-err", drawRatio);
bind("s-run", "s-err", drawSim);
