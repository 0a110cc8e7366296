import init, { Swarm, gamma, gamma_threshold, softmin_points, softmin_concentration, rastrigin_line } from "./pkg/cbo_games_demo.js";

const $ = (id) => document.getElementById(id);
const COLORS = ["#1f77b4", "#ff7f0e"];

function showError(el, e) {
  el.textContent = String(e.message ?? e);
  el.classList.add("err");
}

// live swarm

let swarm = null;
let running = true;
let history = [];

function restart() {
  const status = $("status");
  status.classList.remove("err");
  try {
    swarm = new Swarm(
      $("game").value,
      Number($("coupling").value),
      Number($("particles").value),
      Number($("lambda").value),
      Number($("sigma").value),
      Number($("alpha").value),
      BigInt($("seed").value),
    );
    history = [];
  } catch (e) {
    swarm = null;
    showError(status, e);
  }
}

function toCanvas(c, x, y, span) {
  return [c.width / 2 + (x / span) * (c.width / 2), c.height / 2 - (y / span) * (c.height / 2)];
}

function drawSwarm() {
  const c = $("swarm");
  const g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  g.strokeStyle = "#eee";
  g.beginPath();
  g.moveTo(c.width / 2, 0); g.lineTo(c.width / 2, c.height);
  g.moveTo(0, c.height / 2); g.lineTo(c.width, c.height / 2);
  g.stroke();
  const span = 3.5;
  const pos = swarm.positions();
  const n = pos.length / 4;
  for (let m = 0; m < 2; m++) {
    g.fillStyle = COLORS[m] + "99";
    for (let i = 0; i < n; i++) {
      const k = (m * n + i) * 2;
      const [px, py] = toCanvas(c, pos[k], pos[k + 1], span);
      g.fillRect(px - 1.5, py - 1.5, 3, 3);
    }
  }
  const cons = swarm.consensus();
  for (let m = 0; m < 2; m++) {
    const [px, py] = toCanvas(c, cons[2 * m], cons[2 * m + 1], span);
    g.fillStyle = COLORS[m];
    g.strokeStyle = "#000";
    g.beginPath(); g.arc(px, py, 6, 0, 2 * Math.PI); g.fill(); g.stroke();
  }
  const eq = swarm.equilibrium();
  g.strokeStyle = "#000";
  for (let m = 0; m < eq.length / 2; m++) {
    const [px, py] = toCanvas(c, eq[2 * m], eq[2 * m + 1], span);
    g.beginPath();
    g.moveTo(px - 7, py - 7); g.lineTo(px + 7, py + 7);
    g.moveTo(px + 7, py - 7); g.lineTo(px - 7, py + 7);
    g.stroke();
  }
}

function drawVariance() {
  const c = $("vplot");
  const g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  const pts = history.filter(([, v]) => v > 0 && Number.isFinite(v));
  if (pts.length < 2) return;
  const t1 = pts[pts.length - 1][0];
  const logs = pts.map(([, v]) => Math.log10(v));
  const lo = Math.min(...logs), hi = Math.max(...logs, lo + 1);
  g.strokeStyle = "#333";
  g.beginPath();
  pts.forEach(([t], i) => {
    const x = 30 + (t / t1) * (c.width - 40);
    const y = 10 + ((hi - logs[i]) / (hi - lo)) * (c.height - 30);
    i ? g.lineTo(x, y) : g.moveTo(x, y);
  });
  g.stroke();
  g.fillStyle = "#555";
  g.fillText(`log10 V: ${hi.toFixed(1)}`, 32, 12);
  g.fillText(lo.toFixed(1), 32, c.height - 22);
  g.fillText(`t = ${t1.toFixed(2)}`, c.width - 70, c.height - 6);
}

function frame() {
  if (swarm && running) {
    try {
      swarm.advance(2);
      const v = swarm.variance();
      history.push([swarm.time(), v]);
      if (history.length > 4000) history.shift();
      drawSwarm();
      drawVariance();
      const vText = Number.isFinite(v) ? v.toExponential(3) : "n/a";
      $("status").textContent = `t = ${swarm.time().toFixed(2)}   V = ${vText}`;
    } catch (e) {
      showError($("status"), e);
      swarm = null;
    }
  }
  requestAnimationFrame(frame);
}

// convergence exponent

function updateGamma() {
  const p = Number($("gp").value), pm = Number($("gpm").value), q = Number($("gq").value);
  $("gqv").textContent = q.toFixed(1);
  const out = $("gout");
  out.classList.remove("err");
  try {
    out.textContent = `γ = ${gamma(q, p, pm).toFixed(6)}   (rate 1/2 from q ≥ ${gamma_threshold(pm)} when p = 2)`;
  } catch (e) {
    showError(out, e);
  }
  const c = $("gplot");
  const g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  g.strokeStyle = "#1f77b4";
  g.beginPath();
  let started = false;
  for (let k = 0; k <= 400; k++) {
    const qq = 1 + (39 * k) / 400;
    let y;
    try { y = gamma(qq, p, pm); } catch { started = false; continue; }
    const px = (k / 400) * c.width, py = c.height - 10 - y * 2 * (c.height - 20);
    started ? g.lineTo(px, py) : g.moveTo(px, py);
    started = true;
  }
  g.stroke();
  g.fillStyle = "#555";
  g.fillText("γ = 1/2", 4, 12);
  g.fillText("q from 1 to 40", c.width - 90, c.height - 2);
  const qx = ((q - 1) / 39) * c.width;
  g.strokeStyle = "#d62728";
  g.beginPath(); g.moveTo(qx, 0); g.lineTo(qx, c.height); g.stroke();
}

// softmin concentration

let points = [];
let sampleSeed = 0n;

function drawSoftmin() {
  const alpha = Math.pow(10, Number($("alog").value));
  $("av").textContent = `α = ${alpha.toPrecision(3)}`;
  const c = $("soft");
  const g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  const X = (x) => ((x + 3) / 6) * c.width;
  g.strokeStyle = "#aaa";
  g.beginPath();
  for (let k = 0; k <= 600; k++) {
    const x = -3 + (6 * k) / 600;
    const y = c.height - 10 - (rastrigin_line(x) / 30) * (c.height * 0.4);
    k ? g.lineTo(X(x), y) : g.moveTo(X(x), y);
  }
  g.stroke();
  const res = softmin_concentration(points, alpha);
  const cons = res[res.length - 1];
  const wmax = Math.max(...res.slice(0, -1));
  g.fillStyle = "#1f77b4";
  points.forEach((x, i) => {
    const h = (res[i] / wmax) * c.height * 0.5;
    g.fillRect(X(x) - 2, 10, 4, h);
  });
  g.strokeStyle = "#d62728";
  g.lineWidth = 2;
  g.beginPath(); g.moveTo(X(cons), 0); g.lineTo(X(cons), c.height); g.stroke();
  g.lineWidth = 1;
}

function resample() {
  points = Array.from(softmin_points(40, sampleSeed));
  sampleSeed += 1n;
  drawSoftmin();
}

await init();
$("restart").onclick = restart;
$("pause").onclick = () => {
  running = !running;
  $("pause").textContent = running ? "pause" : "resume";
};
for (const id of ["gp", "gpm", "gq"]) $(id).oninput = updateGamma;
$("alog").oninput = drawSoftmin;
$("resample").onclick = resample;
restart();
updateGamma();
resample();
requestAnimationFrame(frame);
