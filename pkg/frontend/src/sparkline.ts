/**
 * SVG sparklines for windowed series, with anomaly windows shaded.
 *
 * The sparkline is shape only; numbers shown anywhere in the UI always come
 * verbatim from API payloads, never from these scaled coordinates.
 */

export interface SparkOptions {
  width?: number;
  height?: number;
  markWindows?: [number, number][];
}

export function sparklinePath(
  series: [number, number][],
  width: number,
  height: number,
): string {
  if (series.length === 0) return "";
  const ts = series.map((p) => p[0]);
  const vs = series.map((p) => p[1]);
  const t0 = Math.min(...ts);
  const t1 = Math.max(...ts);
  const v0 = Math.min(...vs);
  const v1 = Math.max(...vs);
  const spanT = t1 - t0 || 1;
  const spanV = v1 - v0 || 1;
  const pad = height * 0.08;
  const x = (t: number) => ((t - t0) / spanT) * width;
  const y = (v: number) => height - pad - ((v - v0) / spanV) * (height - 2 * pad);
  return series
    .map((p, i) => `${i === 0 ? "M" : "L"}${x(p[0]).toFixed(2)} ${y(p[1]).toFixed(2)}`)
    .join(" ");
}

export function renderSparkline(
  series: [number, number][],
  opts: SparkOptions = {},
): SVGSVGElement {
  const width = opts.width ?? 220;
  const height = opts.height ?? 36;
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "sparkline");
  svg.setAttribute("preserveAspectRatio", "none");

  if (series.length > 0) {
    const ts = series.map((p) => p[0]);
    const t0 = Math.min(...ts);
    const t1 = Math.max(...ts);
    const spanT = t1 - t0 || 1;
    for (const [a, b] of opts.markWindows ?? []) {
      const left = Math.max(a, t0);
      const right = Math.min(b, t1);
      if (right <= left) continue;
      const rect = document.createElementNS("http://www.w3.org/2000/svg", "rect");
      rect.setAttribute("x", (((left - t0) / spanT) * width).toFixed(2));
      rect.setAttribute("width", (((right - left) / spanT) * width).toFixed(2));
      rect.setAttribute("y", "0");
      rect.setAttribute("height", String(height));
      rect.setAttribute("class", "spark-anomaly");
      svg.append(rect);
    }
  }

  const path = document.createElementNS("http://www.w3.org/2000/svg", "path");
  path.setAttribute("d", sparklinePath(series, width, height));
  path.setAttribute("fill", "none");
  path.setAttribute("class", "spark-line");
  svg.append(path);
  return svg;
}
