// Build the bindings into ./pkg first (see the repository README).
import init, { libraryScenario, simulate, graspRate } from "./pkg/desolder_web.js";

const $ = (id) => document.getElementById(id);

function plot(canvas, xs, series, opts = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = { l: 48, r: 10, t: 14, b: 22 };
  ctx.clearRect(0, 0, w, h);
  const all = series.flatMap((s) => s.ys).filter(Number.isFinite);
  let lo = opts.yMin ?? Math.min(...all), hi = opts.yMax ?? Math.max(...all);
  if (hi === lo) { hi += 1; lo -= 1; }
  const x0 = Math.min(...xs), x1 = Math.max(...xs) || 1;
  const px = (x) => pad.l + ((x - x0) / (x1 - x0 || 1)) * (w - pad.l - pad.r);
  const py = (y) => h - pad.b - ((y - lo) / (hi - lo)) * (h - pad.t - pad.b);

  ctx.strokeStyle = "#999"; ctx.fillStyle = "#444"; ctx.font = "11px sans-serif";
  ctx.strokeRect(pad.l, pad.t, w - pad.l - pad.r, h - pad.t - pad.b);
  ctx.fillText(hi.toPrecision(3), 2, pad.t + 8);
  ctx.fillText(lo.toPrecision(3), 2, h - pad.b);
  ctx.fillText(`${x0.toPrecision(3)}`, pad.l, h - 6);
  ctx.fillText(`${x1.toPrecision(3)} ${opts.xLabel ?? "s"}`, w - pad.r - 60, h - 6);

  for (const m of opts.markers ?? []) {
    ctx.strokeStyle = "#ddd";
    ctx.beginPath(); ctx.moveTo(px(m.t), pad.t); ctx.lineTo(px(m.t), h - pad.b); ctx.stroke();
  }
  let legend = pad.l + 6;
  for (const s of series) {
    ctx.strokeStyle = s.color; ctx.beginPath();
    s.ys.forEach((y, i) => (i ? ctx.lineTo(px(xs[i]), py(y)) : ctx.moveTo(px(xs[i]), py(y))));
    ctx.stroke();
    if (s.dots) {
      ctx.fillStyle = s.color;
      s.ys.forEach((y, i) => ctx.fillRect(px(xs[i]) - 2, py(y) - 2, 4, 4));
    }
    ctx.fillStyle = s.color; ctx.fillText(s.name, legend, pad.t + 12);
    legend += ctx.measureText(s.name).width + 14;
  }
}

function status(text, error = false) {
  $("status").textContent = text;
  $("status").className = error ? "err" : "";
}

function loadLibrary() {
  $("doc").value = libraryScenario($("library").value);
}

function run() {
  let out;
  try {
    out = JSON.parse(simulate($("doc").value, 1500));
  } catch (e) {
    status(String(e.message ?? e), true);
    return;
  }
  const { trace, report } = out;
  plot($("force"), trace.t, [
    { name: "fy [N]", ys: trace.fy, color: "#c33" },
    { name: "fz [N]", ys: trace.fz, color: "#36c" },
  ], { markers: trace.events });
  plot($("thermal"), trace.t, [
    { name: "T [°C]", ys: trace.T, color: "#e80" },
    { name: "melt fraction ×100", ys: trace.phi.map((p) => p * 100), color: "#393" },
    { name: "slide [mm]", ys: trace.disp_mm, color: "#777" },
  ], { markers: trace.events });
  const events = report.events.map((e) => `  ${e.t.toFixed(3).padStart(8)}  ${typeof e.event === "string" ? e.event : JSON.stringify(e.event)}`);
  $("report").textContent =
    `final phase        ${report.final_phase}\n` +
    `desolder / grasp   ${report.desolder_success} / ${report.grasp_success}\n` +
    `removal after heat ${report.time_to_removal?.toFixed(3) ?? "-"} s\n` +
    `early motion       ${report.early_motion}\nevents:\n${events.join("\n")}`;
  status(`done at t = ${report.end_time.toFixed(3)} s`);
}

function sweep() {
  const doc = $("doc").value;
  const trials = Math.max(1, Math.min(1000, Number($("trials").value) || 100));
  const clearances = [0, 0.5, 1, 1.5, 2, 3, 4, 5, 6, 7];
  const xs = [], measured = [], model = [];
  const next = (i) => {
    if (i === clearances.length) { status(`sweep done, ${trials} trials per point`); return; }
    let r;
    try {
      r = JSON.parse(graspRate(doc, clearances[i], trials));
    } catch (e) {
      status(String(e.message ?? e), true);
      return;
    }
    xs.push(r.clearance_mm); measured.push(r.grasp_rate); model.push(r.model);
    plot($("sweepPlot"), xs, [
      { name: "measured grasp rate", ys: measured, color: "#c33", dots: true },
      { name: "1 − jam probability", ys: model, color: "#36c" },
    ], { yMin: 0, yMax: 1, xLabel: "mm" });
    status(`clearance ${r.clearance_mm} mm ...`);
    setTimeout(() => next(i + 1), 0);
  };
  next(0);
}

await init();
$("library").addEventListener("change", () => { loadLibrary(); run(); });
$("run").addEventListener("click", run);
$("sweep").addEventListener("click", sweep);
loadLibrary();
run();
