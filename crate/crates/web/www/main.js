import init, { exampleSource, runProblem, sweep } from "./pkg/volterra_sa_web.js";

const $ = (id) => document.getElementById(id);

function showError(e) {
  $("error").textContent = e ? String(e.message ?? e) : "";
}

function loadExample() {
  $("source").value = exampleSource(Number($("example").value));
}

function cell(row, text, tag = "td") {
  const c = document.createElement(tag);
  c.textContent = text ?? "";
  row.appendChild(c);
}

function renderTable(report) {
  const table = $("table");
  table.replaceChildren();
  const head = table.insertRow();
  for (const h of ["n", "approximate solution", "difference of two term", "absolute error"]) cell(head, h, "th");
  for (const r of report.records) {
    const row = table.insertRow();
    cell(row, r.n);
    cell(row, r.value.text);
    cell(row, r.diff?.text);
    cell(row, r.err?.text);
  }
}

// log10 of |mean|, or null for informatical zeros and missing values.
function logAbs(v) {
  if (!v || v.text === "@.0" || v.mean === 0) return null;
  return Math.log10(Math.abs(v.mean));
}

function plot(report) {
  const canvas = $("plot");
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, pad = 42;
  ctx.clearRect(0, 0, W, H);
  const recs = report.records;
  if (recs.length === 0) return;
  const series = [
    { name: "|v_n - v_{n-1}|", color: "#1f77b4", pts: recs.map((r) => [r.n, logAbs(r.diff)]) },
    { name: "|v - v_n|", color: "#d62728", pts: recs.map((r) => [r.n, logAbs(r.err)]) },
  ];
  const ys = series.flatMap((s) => s.pts.map((p) => p[1])).filter((y) => y !== null);
  const ns = recs.map((r) => r.n);
  const [n0, n1] = [Math.min(...ns), Math.max(...ns, Math.min(...ns) + 1)];
  const yLo = Math.floor(Math.min(...ys, 0)) - 1, yHi = Math.ceil(Math.max(...ys, 0));
  const X = (n) => pad + ((n - n0) / (n1 - n0)) * (W - 2 * pad);
  const Y = (y) => H - pad - ((y - yLo) / (yHi - yLo)) * (H - 2 * pad);

  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#333";
  ctx.font = "11px sans-serif";
  ctx.strokeRect(pad, pad, W - 2 * pad, H - 2 * pad);
  for (let y = yLo; y <= yHi; y += Math.max(1, Math.round((yHi - yLo) / 8))) {
    ctx.fillText(`1e${y}`, 2, Y(y) + 4);
  }
  for (const n of ns) ctx.fillText(n, X(n) - 4, H - pad + 14);

  series.forEach((s, k) => {
    ctx.strokeStyle = ctx.fillStyle = s.color;
    ctx.beginPath();
    let drawing = false;
    for (const [n, y] of s.pts) {
      if (y === null) {
        // informatical zero: mark on the floor
        ctx.fillRect(X(n) - 3, Y(yLo) - 3, 6, 6);
        drawing = false;
        continue;
      }
      drawing ? ctx.lineTo(X(n), Y(y)) : ctx.moveTo(X(n), Y(y));
      drawing = true;
      ctx.fillRect(X(n) - 2, Y(y) - 2, 4, 4);
    }
    ctx.stroke();
    ctx.fillText(s.name, W - pad - 110, pad + 14 + 14 * k);
  });
  ctx.fillStyle = "#333";
  ctx.fillText("n", W / 2, H - 8);
}

function solve() {
  showError(null);
  try {
    const out = JSON.parse(
      runProblem(
        $("source").value,
        $("mode").value,
        Number($("eps").value),
        BigInt(Math.max(0, Math.floor(Number($("seed").value)))),
        Math.max(1, Math.floor(Number($("maxn").value))),
      ),
    );
    const r = out.report;
    const v = r.optimal_value ? r.optimal_value.text : "none";
    const exact = out.exact === null ? "" : `, exact ${out.exact.toPrecision(12)}`;
    $("stop").textContent = `${out.stop}: n = ${r.optimal_n ?? "-"}, v(${r.point}) = ${v}${exact}`;
    renderTable(r);
    plot(r);
  } catch (e) {
    showError(e);
  }
}

function runSweep() {
  showError(null);
  try {
    const mode = $("mode").value === "sa" ? "fpa-abs" : $("mode").value;
    const rows = JSON.parse(sweep($("source").value, mode, $("epslist").value));
    $("sweepout").textContent = rows.map((r) => `${r.eps}: ${r.fired ? r.n : ">" + r.n}`).join("   ");
  } catch (e) {
    showError(e);
  }
}

await init();
$("example").addEventListener("change", () => { loadExample(); solve(); });
$("solve").addEventListener("click", solve);
$("sweep").addEventListener("click", runSweep);
loadExample();
solve();
