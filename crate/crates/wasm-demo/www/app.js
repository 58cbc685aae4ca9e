import init, { Simulation, solver_trace, preconditioner_symbol } from "./pkg/pfch_wasm.js";

const $ = (id) => document.getElementById(id);

// blue -> white -> red
function color(t) {
  t = Math.min(1, Math.max(0, t));
  if (t < 0.5) {
    const s = t / 0.5;
    return [Math.round(40 + 215 * s), Math.round(70 + 185 * s), 255];
  }
  const s = (t - 0.5) / 0.5;
  return [255, Math.round(255 - 205 * s), Math.round(255 - 215 * s)];
}

function drawField(canvas, values, n) {
  let lo = Infinity, hi = -Infinity;
  for (const v of values) { lo = Math.min(lo, v); hi = Math.max(hi, v); }
  const span = hi > lo ? hi - lo : 1;
  const img = new ImageData(n, n);
  // row-major with the first index along x
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) {
      const [r, g, b] = color((values[i * n + j] - lo) / span);
      const p = 4 * ((n - 1 - j) * n + i);
      img.data[p] = r; img.data[p + 1] = g; img.data[p + 2] = b; img.data[p + 3] = 255;
    }
  }
  const off = new OffscreenCanvas(n, n);
  off.getContext("2d").putImageData(img, 0, 0);
  const ctx = canvas.getContext("2d");
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
  return [lo, hi];
}

function drawLogLines(canvas, series, opts) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 40;
  ctx.clearRect(0, 0, w, h);
  let xmax = 1, ylo = Infinity, yhi = -Infinity;
  for (const s of series) {
    for (const [x, y] of s.points) {
      if (!(y > 0)) continue;
      xmax = Math.max(xmax, x);
      ylo = Math.min(ylo, Math.log10(y));
      yhi = Math.max(yhi, Math.log10(y));
    }
  }
  ylo = Math.floor(ylo); yhi = Math.ceil(yhi);
  if (yhi === ylo) yhi = ylo + 1;
  const xmin = opts.logX ? Math.log10(series[0].points[0][0]) : 0;
  const xhi = opts.logX ? Math.log10(xmax) : xmax;
  const X = (x) => pad + (w - 2 * pad) * ((opts.logX ? Math.log10(x) : x) - xmin) / (xhi - xmin || 1);
  const Y = (y) => h - pad - (h - 2 * pad) * (Math.log10(y) - ylo) / (yhi - ylo);
  ctx.strokeStyle = "#999"; ctx.fillStyle = "#444"; ctx.font = "11px sans-serif";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  for (let e = ylo; e <= yhi; e++) ctx.fillText("1e" + e, 2, Y(10 ** e) + 4);
  ctx.fillText(opts.xlabel, w / 2 - 30, h - 8);
  series.forEach((s, k) => {
    ctx.strokeStyle = s.color; ctx.beginPath();
    let first = true;
    for (const [x, y] of s.points) {
      if (!(y > 0)) continue;
      if (first) { ctx.moveTo(X(x), Y(y)); first = false; } else ctx.lineTo(X(x), Y(y));
    }
    ctx.stroke();
    ctx.fillStyle = s.color; ctx.fillText(s.label, w - pad - 120, pad + 16 + 14 * k);
  });
}

let sim = null;
let running = false;

function resetSim() {
  running = false;
  $("sim-run").textContent = "Run";
  try {
    sim = new Simulation($("sim-problem").value, Number($("sim-n").value), $("sim-scheme").value,
      Number($("sim-tol").value), Number($("sim-seed").value));
  } catch (e) {
    $("sim-stats").textContent = String(e);
    sim = null;
    return;
  }
  showSim();
}

function showSim() {
  const [lo, hi] = drawField($("sim-canvas"), sim.field(), sim.n());
  $("sim-stats").textContent = [
    `t         ${sim.time().toFixed(4)}`,
    `next dt   ${sim.dt().toExponential(3)}`,
    `accepted  ${sim.accepted()}`,
    `rejected  ${sim.rejected()}`,
    `FFTs      ${sim.fft()}`,
    `energy    ${sim.energy().toExponential(6)}`,
    `mass      ${sim.mass().toFixed(12)}`,
    `range     [${lo.toFixed(3)}, ${hi.toFixed(3)}]`,
  ].join("\n");
}

function frame() {
  if (!running || !sim) return;
  const t0 = performance.now();
  let more = true;
  // about 30 ms of work per frame
  while (more && performance.now() - t0 < 30) {
    try {
      more = sim.advance(1);
    } catch (e) {
      $("sim-stats").textContent += "\n" + String(e);
      more = false;
    }
  }
  showSim();
  if (more) requestAnimationFrame(frame);
  else { running = false; $("sim-run").textContent = "Run"; }
}

function runTrace() {
  try {
    const t = solver_trace($("tr-problem").value, Number($("tr-n").value), Number($("tr-dt").value), 1);
    const pts = (a) => Array.from(a, (y, i) => [i, y]);
    const pgd = t.pgd(), pagd = t.pagd();
    drawLogLines($("tr-canvas"), [
      { label: "PGD", color: "#d33", points: pts(pgd) },
      { label: "PAGD", color: "#236", points: pts(pagd) },
    ], { xlabel: "iteration", logX: false });
    $("tr-stats").textContent = [
      `PGD   ${pgd.length - 1} iterations, ${t.pgd_fft()} FFTs`,
      `PAGD  ${pagd.length - 1} iterations, ${t.pagd_fft()} FFTs`,
      `ratio ${(t.pagd_fft() / t.pgd_fft()).toFixed(3)}`,
    ].join("\n");
  } catch (e) {
    $("tr-stats").textContent = String(e);
  }
}

function runSymbol() {
  const data = preconditioner_symbol($("sy-problem").value, 64, Number($("sy-dt").value), 200);
  const points = [];
  for (let i = 0; i < data.length; i += 2) points.push([data[i], data[i + 1]]);
  drawLogLines($("sy-canvas"), [{ label: "sigma(k)", color: "#236", points }], { xlabel: "|k| (log)", logX: true });
}

await init();
$("sim-reset").onclick = resetSim;
$("sim-step").onclick = () => { if (sim) { sim.advance(1); showSim(); } };
$("sim-run").onclick = () => {
  if (!sim) resetSim();
  running = !running;
  $("sim-run").textContent = running ? "Pause" : "Run";
  if (running) requestAnimationFrame(frame);
};
for (const id of ["sim-problem", "sim-n", "sim-scheme", "sim-tol", "sim-seed"]) $(id).onchange = resetSim;
$("tr-go").onclick = runTrace;
$("sy-go").onclick = runSymbol;
resetSim();
runTrace();
runSymbol();
