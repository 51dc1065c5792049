import init, { tail_curves, gpd_explorer, hampel_explorer } from './pkg/surprisal_demo.js';

const COLORS = ['#1f77b4', '#ff7f0e', '#2ca02c', '#d62728', '#9467bd', '#8c564b', '#e377c2'];
const $ = (id) => document.getElementById(id);

// series: [{ x, y, color, kind: 'line' | 'points', label, width }]
function plot(canvas, { series, logY = false, xlabel = '', ylabel = '' }) {
  const ctx = canvas.getContext('2d');
  const W = canvas.width, H = canvas.height;
  const m = { l: 60, r: 160, t: 10, b: 40 };
  ctx.clearRect(0, 0, W, H);
  const ty = (v) => (logY ? Math.log10(v) : v);
  const pts = series.flatMap((s) => s.x.map((x, i) => [x, ty(s.y[i])])).filter(([x, y]) => isFinite(x) && isFinite(y));
  if (pts.length === 0) return;
  let [x0, x1] = [Math.min(...pts.map((p) => p[0])), Math.max(...pts.map((p) => p[0]))];
  let [y0, y1] = [Math.min(...pts.map((p) => p[1])), Math.max(...pts.map((p) => p[1]))];
  if (x0 === x1) { x0 -= 1; x1 += 1; }
  if (y0 === y1) { y0 -= 1; y1 += 1; }
  const pad = 0.04 * (y1 - y0);
  y0 -= pad; y1 += pad;
  const px = (x) => m.l + ((x - x0) / (x1 - x0)) * (W - m.l - m.r);
  const py = (y) => H - m.b - ((y - y0) / (y1 - y0)) * (H - m.t - m.b);

  ctx.strokeStyle = '#888'; ctx.fillStyle = '#444'; ctx.font = '11px sans-serif'; ctx.lineWidth = 1;
  ctx.beginPath(); ctx.moveTo(m.l, m.t); ctx.lineTo(m.l, H - m.b); ctx.lineTo(W - m.r, H - m.b); ctx.stroke();
  for (let k = 0; k <= 4; k++) {
    const xv = x0 + ((x1 - x0) * k) / 4, yv = y0 + ((y1 - y0) * k) / 4;
    ctx.fillText(xv.toPrecision(3), px(xv) - 10, H - m.b + 14);
    ctx.fillText(logY ? '1e' + yv.toFixed(1) : yv.toPrecision(3), 4, py(yv) + 4);
  }
  ctx.fillText(xlabel, (W - m.r) / 2, H - 6);
  ctx.save(); ctx.translate(12, H / 2); ctx.rotate(-Math.PI / 2); ctx.fillText(ylabel, 0, 0); ctx.restore();

  series.forEach((s, k) => {
    ctx.strokeStyle = ctx.fillStyle = s.color;
    ctx.lineWidth = s.width || 1.5;
    if (s.kind === 'points') {
      s.x.forEach((x, i) => {
        const y = ty(s.y[i]);
        if (!isFinite(y)) return;
        ctx.beginPath(); ctx.arc(px(x), py(y), s.radius || 2, 0, 2 * Math.PI); ctx.fill();
      });
    } else {
      ctx.beginPath();
      let started = false;
      s.x.forEach((x, i) => {
        const y = ty(s.y[i]);
        if (!isFinite(y)) { started = false; return; }
        started ? ctx.lineTo(px(x), py(y)) : ctx.moveTo(px(x), py(y));
        started = true;
      });
      ctx.stroke();
    }
    if (s.label) {
      ctx.fillRect(W - m.r + 10, m.t + 6 + 16 * k, 12, 3);
      ctx.fillStyle = '#222'; ctx.fillText(s.label, W - m.r + 28, m.t + 10 + 16 * k);
    }
  });
}

function guard(infoId, fn) {
  const info = $(infoId);
  try {
    info.classList.remove('error');
    fn(info);
  } catch (e) {
    info.classList.add('error');
    info.textContent = String(e);
  }
}

function runCurves() {
  guard('c-info', (info) => {
    const t0 = performance.now();
    const r = JSON.parse(tail_curves($('c-truth').value, +$('c-n').value, +$('c-reps').value, +$('c-seed').value));
    const series = [{ x: r.y, y: r.p_true, color: '#000', label: 'true', width: 2.5 }];
    r.series.forEach((s, k) => series.push({ x: r.y, y: s.p, color: COLORS[k % COLORS.length], label: s.label }));
    plot($('c-plot'), { series, logY: true, xlabel: 'y', ylabel: 'Pr(S >= s(y))' });
    info.textContent = `${r.series.length} estimators, ${(performance.now() - t0).toFixed(0)} ms`;
  });
}

function runGpd() {
  guard('g-info', (info) => {
    const r = JSON.parse(gpd_explorer($('g-model').value, +$('g-n').value, +$('g-beta').value, +$('g-seed').value));
    plot($('g-plot'), {
      logY: true, xlabel: 'surprisal s', ylabel: 'Pr(S >= s)',
      series: [
        { x: r.empirical.map((p) => p[0]), y: r.empirical.map((p) => p[1]), color: '#999', kind: 'points', label: 'empirical' },
        { x: r.grid, y: r.gpd, color: COLORS[3], label: 'GPD tail', width: 2 },
        { x: r.grid, y: r.assumed, color: COLORS[0], label: 'model', width: 2 },
      ],
    });
    const f = r.fit;
    info.textContent = `u = ${f.u.toFixed(4)}, sigma = ${f.sigma.toFixed(4)}, xi = ${f.xi.toFixed(4)}, ${f.n_exceed} exceedances`;
  });
}

function newSeries() {
  // noisy seasonal series with a few planted spikes
  let seed = (Math.random() * 2 ** 31) | 0;
  const rand = () => ((seed = (seed * 1103515245 + 12345) & 0x7fffffff) / 0x7fffffff);
  const gauss = () => Math.sqrt(-2 * Math.log(rand() + 1e-12)) * Math.cos(2 * Math.PI * rand());
  const y = Array.from({ length: 150 }, (_, t) => 10 + 3 * Math.sin(t / 8) + 0.4 * gauss());
  for (let k = 0; k < 4; k++) y[10 + Math.floor(rand() * 130)] += (rand() < 0.5 ? -1 : 1) * (2.5 + 2 * rand());
  $('h-values').value = y.map((v) => v.toFixed(3)).join(', ');
  runHampel();
}

function runHampel() {
  const h = +$('h-window').value;
  $('h-window-val').textContent = h;
  guard('h-info', (info) => {
    const r = JSON.parse(hampel_explorer($('h-values').value, h, +$('h-alpha').value));
    const t = r.y.map((_, i) => i);
    plot($('h-plot'), {
      xlabel: 't', ylabel: 'value',
      series: [
        { x: t, y: r.upper, color: '#bbb', label: `median ± ${r.tau.toFixed(2)}σ` },
        { x: t, y: r.lower, color: '#bbb' },
        { x: t, y: r.median, color: COLORS[2], label: 'rolling median' },
        { x: t, y: r.y, color: COLORS[0], kind: 'points', label: 'observed' },
        { x: r.flagged, y: r.flagged.map((i) => r.y[i]), color: COLORS[3], kind: 'points', radius: 5, label: 'flagged' },
      ],
    });
    info.textContent = `${r.flagged.length} flagged: t = ${r.flagged.join(', ') || 'none'}`;
  });
}

await init();
$('c-run').onclick = runCurves;
$('g-run').onclick = runGpd;
$('h-new').onclick = newSeries;
$('h-window').oninput = runHampel;
$('h-alpha').onchange = runHampel;
$('h-values').onchange = runHampel;
runCurves();
runGpd();
newSeries();
