import init, { recover, zero_block_scan } from "./pkg/lowrank_web.js";

const num = (id) => Number(document.getElementById(id).value);

function heatmap(id, data, k, max) {
  const canvas = document.getElementById(id);
  const scale = Math.max(1, Math.floor(256 / k));
  canvas.width = canvas.height = k;
  canvas.style.width = canvas.style.height = `${k * scale}px`;
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(k, k);
  for (let i = 0; i < k * k; i++) {
    const v = Math.max(0, Math.min(1, data[i] / max));
    const c = Math.round(255 * (1 - v));
    img.data.set([c, c, 255, 255], 4 * i);
  }
  ctx.putImageData(img, 0, 0);
}

function weightBars(weights, zeroed) {
  const canvas = document.getElementById("weights");
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const top = Math.log(Math.max(...weights)) || 1;
  const bar = width / weights.length;
  const dead = new Set(zeroed);
  weights.forEach((w, i) => {
    const h = 10 + (height - 20) * (Math.log(w) / top);
    ctx.fillStyle = dead.has(i) ? "#c33" : w > 1 ? "#36c" : "#9ab";
    ctx.fillRect(i * bar, height - h, Math.max(1, bar - 1), h);
  });
  ctx.strokeStyle = "#333";
  ctx.beginPath();
  ctx.moveTo(0, height - 10);
  ctx.lineTo(width, height - 10);
  ctx.stroke();
}

function runRecover() {
  const out = document.getElementById("summary");
  try {
    const k = num("k");
    const res = recover(k, num("r"), num("mass"), num("heavy"), num("boost"), num("seed"));
    // shared color scale from the typical entry of M, so heavy rows saturate
    const m = Array.from(res.model).sort((a, b) => a - b);
    const max = 2 * m[Math.floor(0.9 * m.length)];
    heatmap("m", res.model, k, max);
    heatmap("x", res.observation, k, max);
    heatmap("est", res.estimate, k, max);
    heatmap("base", res.baseline, k, max);
    weightBars(Array.from(res.row_weights), Array.from(res.zeroed_rows));
    out.textContent =
      `n_avg ${res.n_avg.toFixed(1)}\n` +
      `normalized L1 error: curated ${res.curated_error.toFixed(4)}, plain ${res.baseline_error.toFixed(4)}\n` +
      `zeroed rows: ${Array.from(res.zeroed_rows).join(", ") || "none"}`;
    res.free();
  } catch (e) {
    out.textContent = String(e);
  }
}

function runScan() {
  const out = document.getElementById("blocks");
  try {
    const res = zero_block_scan(num("ck"), num("cn"), num("ct"), num("seed"));
    out.textContent =
      `zero blocks per trial: ${Array.from(res.counts).join(" ")}\n` +
      `P(some block all zero): observed ${res.empirical_probability.toFixed(3)}, ` +
      `expected ${res.expected_probability.toFixed(4)}\n` +
      `every trial with a zero block has ||X - M|| >= n_max`;
    res.free();
  } catch (e) {
    out.textContent = String(e);
  }
}

await init();
document.getElementById("run").onclick = runRecover;
document.getElementById("scan").onclick = runScan;
runRecover();
