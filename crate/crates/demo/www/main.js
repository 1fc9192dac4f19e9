import init, { shellMap, windowModuli, moleculeCheck } from "./pkg/anisowave_demo.js";

const $ = (id) => document.getElementById(id);
const ORIGIN = -2147483648;

function paint(canvas, values, color) {
  const n = canvas.width;
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(n, n);
  // Flat indices are x-major; y grows upward on screen.
  for (let i = 0; i < n; i++) {
    for (let k = 0; k < n; k++) {
      const [r, g, b] = color(values[i * n + k]);
      const p = 4 * ((n - 1 - k) * n + i);
      img.data[p] = r;
      img.data[p + 1] = g;
      img.data[p + 2] = b;
      img.data[p + 3] = 255;
    }
  }
  ctx.putImageData(img, 0, 0);
}

function report(el, fn) {
  try {
    el.textContent = fn();
    el.className = "";
  } catch (e) {
    el.textContent = String(e.message ?? e);
    el.className = "fail";
  }
}

function drawShells() {
  const canvas = $("shell-canvas");
  report($("shell-status"), () => {
    const shells = shellMap($("matrix").value, canvas.width, Number($("shell-extent").value));
    const finite = shells.filter((j) => j !== ORIGIN);
    const lo = Math.min(...finite);
    const hi = Math.max(...finite);
    paint(canvas, shells, (j) => {
      if (j === ORIGIN) return [0, 0, 0];
      const t = hi > lo ? (j - lo) / (hi - lo) : 0.5;
      const band = (j & 1) ? 0.85 : 1.0;
      return [255 * t * band, 80 * band, 255 * (1 - t) * band];
    });
    return `shells ${lo} to ${hi}`;
  });
}

function drawWindow() {
  const canvas = $("wnd-canvas");
  report($("wnd-status"), () => {
    const m = windowModuli($("matrix").value, Number($("wnd-center").value),
      Number($("wnd-halfwidth").value), canvas.width, Number($("wnd-extent").value));
    const peak = Math.max(...m);
    paint(canvas, m, (v) => {
      const t = Math.sqrt(v / peak);
      return [255 * t, 255 * t * t, 60 + 195 * t * t * t];
    });
    return `max |ψ| = ${peak.toExponential(3)}`;
  });
}

function runMolecule() {
  const out = $("mol-out");
  let pass = false;
  report(out, () => {
    const r = JSON.parse(moleculeCheck($("matrix").value, $("mol-params").value,
      Number($("mol-l").value), Number($("mol-n").value), Number($("mol-delta").value)));
    pass = r.check.pass;
    return JSON.stringify(r, null, 2);
  });
  out.className = pass ? "pass" : "fail";
}

await init();
$("shell-draw").onclick = drawShells;
$("wnd-draw").onclick = drawWindow;
$("mol-run").onclick = runMolecule;
drawShells();
drawWindow();
runMolecule();
