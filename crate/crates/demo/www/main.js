import init, { Demo } from "./pkg/uavqos_demo.js";

const $ = (id) => document.getElementById(id);
const mapCanvas = $("map");
const ctx = mapCanvas.getContext("2d");
const STATUS = ["feasible", "relaxed", "infeasible"];
const GROUP_COLOURS = ["#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];

let demo = null;
let history = [];
let shade = null;
let timer = null;

function params() {
  return {
    seed: BigInt($("seed").value || 0),
    altitude: Number($("altitude").value),
    vmax: Number($("vmax").value),
    cf: Number($("cf").value),
    follow: $("policy").value === "follow",
  };
}

function reset() {
  stop();
  const p = params();
  $("altitude-v").textContent = p.altitude;
  $("vmax-v").textContent = p.vmax;
  if (demo) demo.free();
  demo = new Demo(p.seed, p.altitude, p.vmax, p.cf, p.follow);
  history = [];
  shade = null;
  demo.step();
  history.push(demo.sum_rate());
  draw();
}

function step() {
  if (!demo || demo.done()) return stop();
  demo.step();
  history.push(demo.sum_rate());
  if (shade) shade.values = demo.los_map(shade.user, 60);
  draw();
}

function stop() {
  if (timer) clearInterval(timer);
  timer = null;
  $("play").textContent = "Play";
}

function toCanvas(x, y) {
  const s = mapCanvas.width / demo.width();
  return [x * s, mapCanvas.height - y * s];
}

function drawMap() {
  const w = mapCanvas.width, h = mapCanvas.height;
  ctx.fillStyle = "#f4f4f0";
  ctx.fillRect(0, 0, w, h);
  if (shade) {
    const n = Math.round(Math.sqrt(shade.values.length));
    const cw = w / n, ch = h / n;
    for (let j = 0; j < n; j++) {
      for (let i = 0; i < n; i++) {
        const v = shade.values[j * n + i];
        ctx.fillStyle = `rgba(27, 158, 119, ${0.1 + 0.6 * v})`;
        ctx.fillRect(i * cw, h - (j + 1) * ch, cw + 0.5, ch + 0.5);
      }
    }
  }
  const b = demo.buildings();
  for (let i = 0; i < b.length; i += 5) {
    const [x0, y0] = toCanvas(b[i], b[i + 3]);
    const [x1, y1] = toCanvas(b[i + 1], b[i + 2]);
    const tone = Math.round(200 - 2.5 * b[i + 4]);
    ctx.fillStyle = `rgb(${tone}, ${tone}, ${tone + 10})`;
    ctx.fillRect(x0, y0, x1 - x0, y1 - y0);
    ctx.fillStyle = "#fff";
    ctx.fillText(`${b[i + 4].toFixed(0)} m`, x0 + 3, y0 + 12);
  }
  const u = demo.users();
  for (let i = 0; i < u.length; i += 4) {
    const [x, y] = toCanvas(u[i], u[i + 1]);
    const group = u[i + 3];
    ctx.beginPath();
    ctx.arc(x, y, 5, 0, 2 * Math.PI);
    ctx.fillStyle = group < 0 ? "#1f78b4" : GROUP_COLOURS[group % GROUP_COLOURS.length];
    ctx.fill();
    ctx.lineWidth = 2;
    ctx.strokeStyle = u[i + 2] === 1 ? "#1b9e77" : u[i + 2] === 0 ? "#b2182b" : "#999";
    ctx.stroke();
    if (shade && shade.user === i / 4) {
      ctx.strokeStyle = "#000";
      ctx.strokeRect(x - 8, y - 8, 16, 16);
    }
  }
  const [qx, qy] = demo.uav();
  const [x, y] = toCanvas(qx, qy);
  ctx.fillStyle = "#000";
  ctx.beginPath();
  ctx.moveTo(x, y - 9); ctx.lineTo(x + 8, y + 6); ctx.lineTo(x - 8, y + 6);
  ctx.closePath();
  ctx.fill();
}

function drawBars() {
  const c = $("bars"), g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  const out = demo.compare_allocators();
  if (out.length === 0) return;
  const k = (out.length - 4) / 2;
  const heur = out.slice(0, k), dual = out.slice(k, 2 * k);
  const [hs, ds, hst, dst] = out.slice(2 * k);
  const top = Math.max(...heur, ...dual, 1);
  const bw = c.width / k;
  for (let i = 0; i < k; i++) {
    const hh = (heur[i] / top) * (c.height - 20);
    const dh = (dual[i] / top) * (c.height - 20);
    g.fillStyle = "#1b9e77";
    g.fillRect(i * bw + 1, c.height - hh, bw / 2 - 1, hh);
    g.fillStyle = "#7570b3";
    g.fillRect(i * bw + bw / 2, c.height - dh, bw / 2 - 1, dh);
  }
  g.fillStyle = "#222";
  g.fillText(`max ${(top / 1e6).toFixed(1)} Mbit/s`, 4, 12);
  $("alloc").innerHTML =
    `<span style="color:#1b9e77">heuristic</span>: ${(hs / 1e6).toFixed(1)} Mbit/s, ${STATUS[hst]}<br>` +
    `<span style="color:#7570b3">dual ascent</span>: ${(ds / 1e6).toFixed(1)} Mbit/s, ${STATUS[dst]}`;
}

function drawSeries() {
  const c = $("series"), g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  if (history.length < 2) return;
  const top = Math.max(...history, 1);
  const n = demo.horizon();
  g.strokeStyle = "#1b9e77";
  g.beginPath();
  history.forEach((v, i) => {
    const x = (i / (n - 1)) * c.width;
    const y = c.height - (v / top) * (c.height - 14);
    if (i === 0) g.moveTo(x, y); else g.lineTo(x, y);
  });
  g.stroke();
  g.fillStyle = "#222";
  g.fillText(`max ${(top / 1e6).toFixed(1)} Mbit/s`, 4, 12);
}

function draw() {
  drawMap();
  drawBars();
  drawSeries();
  const rates = demo.rates();
  const min = rates.length ? Math.min(...rates) : 0;
  $("stats").textContent =
    `slot ${demo.slot()} / ${demo.horizon()}\n` +
    `sum rate ${(demo.sum_rate() / 1e6).toFixed(2)} Mbit/s\n` +
    `min user rate ${(min / 1e6).toFixed(2)} Mbit/s\n` +
    `status ${demo.status()}`;
}

mapCanvas.addEventListener("click", (ev) => {
  if (!demo) return;
  const r = mapCanvas.getBoundingClientRect();
  const s = demo.width() / mapCanvas.width;
  const x = (ev.clientX - r.left) * s;
  const y = (mapCanvas.height - (ev.clientY - r.top)) * s;
  const u = demo.users();
  let user = -1, best = 8 * s;
  for (let i = 0; i < u.length; i += 4) {
    const d = Math.hypot(u[i] - x, u[i + 1] - y);
    if (d < best) { best = d; user = i / 4; }
  }
  shade = { user, values: demo.los_map(user, 60) };
  draw();
});

await init();
for (const id of ["seed", "altitude", "vmax", "cf", "policy"]) $(id).addEventListener("change", reset);
$("reset").addEventListener("click", reset);
$("step").addEventListener("click", step);
$("play").addEventListener("click", () => {
  if (timer) return stop();
  $("play").textContent = "Pause";
  timer = setInterval(step, 150);
});
reset();
