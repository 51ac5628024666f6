/**
 * Gaussian kernel density estimate for drawing posterior shapes.
 *
 * Display-only: every interval, mean, and probability shown in the UI comes
 * from the service; this smooths the thinned sample payload into a curve.
 */

export interface DensityCurve {
  x: number[];
  y: number[];
}

export function silvermanBandwidth(samples: number[]): number {
  const n = samples.length;
  if (n < 2) return 1;
  const mean = samples.reduce((a, b) => a + b, 0) / n;
  const sd = Math.sqrt(
    samples.reduce((a, b) => a + (b - mean) ** 2, 0) / (n - 1),
  );
  const sorted = [...samples].sort((a, b) => a - b);
  const q = (p: number) => sorted[Math.min(n - 1, Math.floor(p * n))];
  const iqr = q(0.75) - q(0.25);
  const scale = Math.min(sd, iqr / 1.349) || sd || 1;
  return 0.9 * scale * Math.pow(n, -0.2);
}

export function gaussianKde(samples: number[], gridSize = 100): DensityCurve {
  if (samples.length === 0) return { x: [], y: [] };
  const h = silvermanBandwidth(samples);
  const lo = Math.min(...samples) - 3 * h;
  const hi = Math.max(...samples) + 3 * h;
  const x: number[] = [];
  const y: number[] = [];
  const norm = 1 / (samples.length * h * Math.sqrt(2 * Math.PI));
  for (let i = 0; i < gridSize; i++) {
    const xi = lo + ((hi - lo) * i) / (gridSize - 1);
    let s = 0;
    for (const v of samples) {
      const z = (xi - v) / h;
      s += Math.exp(-0.5 * z * z);
    }
    x.push(xi);
    y.push(s * norm);
  }
  return { x, y };
}

/** Trapezoid integral, used only by tests to sanity-check the curve. */
export function integrate(curve: DensityCurve): number {
  let area = 0;
  for (let i = 1; i < curve.x.length; i++) {
    area +=
      ((curve.y[i] + curve.y[i - 1]) / 2) * (curve.x[i] - curve.x[i - 1]);
  }
  return area;
}
