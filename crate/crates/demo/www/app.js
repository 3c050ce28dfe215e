// Built with: wasm-bindgen --target web --out-dir www/pkg <target>/wasm32-unknown-unknown/release/cubiclines_demo.wasm
import init, { hilbert_table, line_census, track_loop } from "./pkg/cubiclines_demo.js";

const $ = (id) => document.getElementById(id);

function guard(out, f) {
  try {
    f();
  } catch (e) {
    out.innerHTML = `<span class="error">${e}</span>`;
  }
}

function showHilbert() {
  guard($("hout"), () => {
    const t = JSON.parse(hilbert_table(Number($("hp").value)));
    let html = "<table><tr><th></th>" + t.labels.map((l) => `<th>${l}</th>`).join("") + "</tr>";
    t.table.forEach((row, i) => {
      html += `<tr><th>${t.labels[i]}</th>` + row.map((s) => `<td class="${s > 0 ? "pos" : "neg"}">${s}</td>`).join("") + "</tr>";
    });
    $("hout").innerHTML = html + "</table>";
  });
}

function showCensus() {
  guard($("lout"), () => {
    const r = JSON.parse(line_census(Number($("lp").value), Number($("ln").value), $("lform").value));
    const shown = r.lines.map((g) => `  span{(${g[0]}), (${g[1]})}`).join("\n");
    $("lout").textContent = `${r.lines_scanned} lines scanned, ${r.lines_found} on the cubic\n${shown}`;
  });
}

function plot(trace) {
  const c = $("tplot");
  const ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  const pts = trace.branches.flat();
  const ymax = Math.max(1e-9, ...pts.map(([, x]) => Math.abs(x)));
  const X = (t) => ((t + 1) / 2) * (c.width - 20) + 10;
  const Y = (x) => c.height / 2 - (x / ymax) * (c.height / 2 - 10);
  ctx.strokeStyle = "#ccc";
  ctx.beginPath();
  ctx.moveTo(0, c.height / 2);
  ctx.lineTo(c.width, c.height / 2);
  ctx.stroke();
  const colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
  trace.branches.forEach((b, i) => {
    ctx.strokeStyle = colors[i % colors.length];
    ctx.beginPath();
    b.forEach(([t, x], k) => {
      // branches wrap from t = 1 to t = −1; do not draw the jump
      if (k === 0 || Math.abs(t - b[k - 1][0]) > 0.5) ctx.moveTo(X(t), Y(x));
      else ctx.lineTo(X(t), Y(x));
    });
    ctx.stroke();
  });
}

function showTrack() {
  guard($("tout"), () => {
    const r = JSON.parse(track_loop($("tform").value, 2000));
    plot(r);
    $("tout").textContent =
      `windings ${JSON.stringify(r.winding)}, total multiplicity ${r.total_multiplicity}, ` +
      `real roots ${r.min_multiplicity}…${r.max_multiplicity}, max residual ${r.max_residual.toExponential(2)}, ` +
      `antipodal witness ${r.antipodal_witness ? "found" : "missing"}`;
  });
}

await init();
$("hgo").onclick = showHilbert;
$("lgo").onclick = showCensus;
$("tgo").onclick = showTrack;
showHilbert();
