/**
 * Pure HTML/SVG string rendering.
 *
 * Invariant: no statistics are computed here — every displayed number is a
 * field from a service response, formatted. The KDE curve is the single
 * display-only smoothing step.
 */

import { gaussianKde } from "./kde.js";
import type { ContrastAnswer, EffectSummary, ProfileAnswer } from "./types.js";

export function fmt(value: number, digits = 2): string {
  return value.toFixed(digits);
}

export function densityPath(
  samples: number[],
  width: number,
  height: number,
  xMin: number,
  xMax: number,
): string {
  const curve = gaussianKde(samples, 80);
  if (curve.x.length === 0) return "";
  const yMax = Math.max(...curve.y) || 1;
  const px = (x: number) => ((x - xMin) / (xMax - xMin)) * width;
  const py = (y: number) => height - (y / yMax) * (height - 2);
  let d = `M ${px(curve.x[0]).toFixed(1)} ${height}`;
  for (let i = 0; i < curve.x.length; i++) {
    d += ` L ${px(curve.x[i]).toFixed(1)} ${py(curve.y[i]).toFixed(1)}`;
  }
  d += ` L ${px(curve.x[curve.x.length - 1]).toFixed(1)} ${height} Z`;
  return d;
}

export function renderEffectPanel(
  treatment: string,
  reference: string,
  effect: EffectSummary,
  optimalProb: number,
  tie: boolean,
  xMin: number,
  xMax: number,
): string {
  const isRef = treatment === reference;
  const width = 360;
  const height = 70;
  const px = (x: number) => ((x - xMin) / (xMax - xMin)) * width;
  const badge = `<span class="badge prob">P(optimal) ${fmt(optimalProb, 3)}</span>`;
  const tieBadge = tie ? '<span class="badge tie">tie</span>' : "";
  const body = isRef
    ? `<div class="ref-note">reference (effect 0)</div>
       <svg viewBox="0 0 ${width} ${height}" class="density">
         <line x1="${px(0).toFixed(1)}" y1="0" x2="${px(0).toFixed(1)}" y2="${height}" class="zero-line"/>
       </svg>`
    : `<svg viewBox="0 0 ${width} ${height}" class="density">
         <line x1="${px(0).toFixed(1)}" y1="0" x2="${px(0).toFixed(1)}" y2="${height}" class="zero-line"/>
         <path d="${densityPath(effect.samples, width, height, xMin, xMax)}" class="curve"/>
         <line x1="${px(effect.q025).toFixed(1)}" y1="${height - 6}" x2="${px(effect.q975).toFixed(1)}" y2="${height - 6}" class="cri"/>
         <circle cx="${px(effect.mean).toFixed(1)}" cy="${height - 6}" r="3" class="mean"/>
       </svg>
       <div class="stats">mean ${fmt(effect.mean)} &middot; 95% CrI [${fmt(effect.q025)}, ${fmt(effect.q975)}]</div>`;
  return `<section class="panel" data-treatment="${treatment}">
    <header><h3>treatment ${treatment}</h3>${badge}${tieBadge}</header>
    ${body}
  </section>`;
}

export function renderProfileView(answer: ProfileAnswer): string {
  // shared x-range across panels so shapes are comparable
  let lo = 0;
  let hi = 0;
  for (const t of answer.treatments) {
    const e = answer.effects[t];
    lo = Math.min(lo, e.q025, ...(e.samples.length ? [Math.min(...e.samples)] : []));
    hi = Math.max(hi, e.q975, ...(e.samples.length ? [Math.max(...e.samples)] : []));
  }
  const pad = 0.05 * (hi - lo || 1);
  const panels = answer.treatments
    .map((t) =>
      renderEffectPanel(
        t,
        answer.reference,
        answer.effects[t],
        answer.optimal_probs[t],
        answer.tie && t === answer.optimal,
        lo - pad,
        hi + pad,
      ),
    )
    .join("\n");
  return `<div class="profile-view">
    <p class="optimal-line">optimal treatment: <strong>${answer.optimal}</strong>
      (posterior probability ${fmt(answer.optimal_probs[answer.optimal], 3)})</p>
    ${panels}
  </div>`;
}

export function renderContrastCard(answer: ContrastAnswer): string {
  // the excludes-zero verdict comes from the service, never from comparing
  // intervals client-side
  const verdict = answer.excludes_zero
    ? '<span class="badge excludes">95% CrI excludes 0</span>'
    : '<span class="badge includes">95% CrI includes 0</span>';
  return `<article class="contrast-card" data-contrast="${answer.g}-${answer.g_prime}">
    <h4>treatment ${answer.g} vs ${answer.g_prime} (coefficient ${answer.q})</h4>
    <p>mean ${fmt(answer.mean)} &middot; 95% CrI [${fmt(answer.q025)}, ${fmt(answer.q975)}]</p>
    ${verdict}
  </article>`;
}

export function renderError(message: string): string {
  return `<div class="error" role="alert">${message}</div>`;
}
