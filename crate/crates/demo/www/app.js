import init, { compareConvergence, softmaxRow, theoremParams } from "./pkg/mdvi_demo.js";

const num = (form, name) => Number(form.elements[name].value);

function showError(el, err) {
  el.innerHTML = "";
  const p = document.createElement("p");
  p.className = "error";
  p.textContent = String(err.message ?? err);
  el.appendChild(p);
}

function drawChart(canvas, curves) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = { l: 60, r: 20, t: 20, b: 40 };
  ctx.clearRect(0, 0, w, h);
  const floor = 1e-6;
  const xs = curves.flatMap((c) => c.samples);
  const ys = curves.flatMap((c) => c.error).map((e) => Math.max(e, floor));
  const xMax = Math.max(...xs, 1);
  const yLo = Math.floor(Math.log10(Math.min(...ys)));
  const yHi = Math.ceil(Math.log10(Math.max(...ys)));
  const px = (x) => pad.l + (x / xMax) * (w - pad.l - pad.r);
  const py = (y) => {
    const t = (Math.log10(Math.max(y, floor)) - yLo) / Math.max(yHi - yLo, 1);
    return h - pad.b - t * (h - pad.t - pad.b);
  };
  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#444";
  ctx.font = "12px sans-serif";
  for (let e = yLo; e <= yHi; e++) {
    ctx.beginPath();
    ctx.moveTo(pad.l, py(10 ** e));
    ctx.lineTo(w - pad.r, py(10 ** e));
    ctx.globalAlpha = 0.25;
    ctx.stroke();
    ctx.globalAlpha = 1;
    ctx.fillText(`1e${e}`, 10, py(10 ** e) + 4);
  }
  ctx.fillText("0", pad.l, h - 15);
  ctx.fillText(`${xMax} samples`, w - pad.r - 90, h - 15);
  const colors = ["#1f5fbf", "#d2691e"];
  curves.forEach((c, i) => {
    ctx.strokeStyle = colors[i];
    ctx.lineWidth = 2;
    ctx.beginPath();
    c.samples.forEach((x, j) => {
      const [X, Y] = [px(x), py(c.error[j])];
      j === 0 ? ctx.moveTo(X, Y) : ctx.lineTo(X, Y);
    });
    ctx.stroke();
    ctx.fillStyle = colors[i];
    ctx.fillText(c.label, pad.l + 10, pad.t + 14 + 16 * i);
  });
  ctx.lineWidth = 1;
}

function runCompare(ev) {
  ev?.preventDefault();
  const f = document.getElementById("compare");
  const out = document.getElementById("compare-out");
  try {
    const r = JSON.parse(
      compareConvergence(
        num(f, "states"), num(f, "actions"), num(f, "branching"), num(f, "gamma"),
        num(f, "alpha"), num(f, "samples"), num(f, "iterations"), num(f, "seed"),
      ),
    );
    drawChart(document.getElementById("chart"), [r.mdvi, r.qlearning]);
    const last = (c) => c.error[c.error.length - 1].toExponential(3);
    out.textContent = `Final gap: MDVI ${last(r.mdvi)}, Q-learning ${last(r.qlearning)} (errors below 1e-6 drawn at the floor).`;
  } catch (err) {
    showError(out, err);
  }
}

function runSoftmax() {
  const f = document.getElementById("softmax");
  const out = document.getElementById("softmax-out");
  const beta = 10 ** num(f, "logbeta");
  document.getElementById("beta-label").textContent = `beta = ${beta.toPrecision(3)}`;
  try {
    const scores = f.elements.scores.value.split(",").map((s) => Number(s.trim()));
    const r = JSON.parse(softmaxRow(new Float64Array(scores), beta));
    const rows = r.probabilities
      .map((p, a) => `<tr><td>a${a}</td><td>${scores[a]}</td><td>${p.toFixed(4)}</td>` +
        `<td style="text-align:left"><span class="bar" style="width:${(200 * p).toFixed(1)}px"></span></td></tr>`)
      .join("");
    out.innerHTML =
      `<p>max ${r.max.toFixed(4)} &le; soft value ${r.soft_value.toFixed(4)} &le; max + ln(A)/beta = ${r.upper_bound.toFixed(4)}</p>` +
      `<table><tr><th>action</th><th>score</th><th>probability</th><th></th></tr>${rows}</table>`;
  } catch (err) {
    showError(out, err);
  }
}

function runParams(ev) {
  ev?.preventDefault();
  const f = document.getElementById("params");
  const out = document.getElementById("params-out");
  try {
    const r = JSON.parse(
      theoremParams(num(f, "theorem"), num(f, "gamma"), num(f, "states"), num(f, "actions"), num(f, "eps"), num(f, "delta")),
    );
    out.innerHTML =
      `<p>alpha = ${r.alpha}, K = ${r.iterations}, M = ${r.samples_per_update}, total samples K&middot;M&middot;X&middot;A = ${r.total_samples}</p>` +
      r.warnings.map((w) => `<p class="error">${w}</p>`).join("");
  } catch (err) {
    showError(out, err);
  }
}

await init();
document.getElementById("compare").addEventListener("submit", runCompare);
document.getElementById("softmax").addEventListener("input", runSoftmax);
document.getElementById("params").addEventListener("submit", runParams);
runCompare();
runSoftmax();
runParams();
