// SVG map rendering: equirectangular projection of the current state plus
// optional zone overlays and a blackout strip. Pure string output so it can
// be unit-tested without a DOM.

import type { LatLon, StateDoc } from "./types.js";

export interface GeoJsonFeature {
  type: "Feature";
  geometry: { type: string; coordinates: unknown } | null;
  properties: Record<string, unknown>;
}

export interface GeoJsonCollection {
  type: "FeatureCollection";
  features: GeoJsonFeature[];
}

interface Bounds {
  minLat: number;
  maxLat: number;
  minLon: number;
  maxLon: number;
}

const W = 800;
const H = 500;
const PAD = 0.25; // degrees of margin around the entities

function bounds(state: StateDoc): Bounds {
  const pts: LatLon[] = [
    ...state.aircraft.map((a) => a.position),
    ...state.watercraft.map((w) => w.position),
    ...state.facilities.map((f) => f.position),
    ...state.pending_requests.map((r) => r.position),
  ];
  if (pts.length === 0) {
    return { minLat: -1, maxLat: 1, minLon: -1, maxLon: 1 };
  }
  return {
    minLat: Math.min(...pts.map((p) => p.lat)) - PAD,
    maxLat: Math.max(...pts.map((p) => p.lat)) + PAD,
    minLon: Math.min(...pts.map((p) => p.lon)) - PAD,
    maxLon: Math.max(...pts.map((p) => p.lon)) + PAD,
  };
}

function projector(b: Bounds) {
  const sx = W / (b.maxLon - b.minLon);
  const sy = H / (b.maxLat - b.minLat);
  return (p: LatLon): [number, number] => [
    (p.lon - b.minLon) * sx,
    (b.maxLat - p.lat) * sy,
  ];
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderMap(state: StateDoc, zones?: GeoJsonCollection | null): string {
  const b = bounds(state);
  const project = projector(b);
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${W} ${H}" ` +
    `class="ops-map" data-revision="${state.revision}">`);
  parts.push(`<rect width="${W}" height="${H}" fill="#0b2233"/>`);

  if (zones) {
    for (const f of zones.features) {
      if (!f.geometry || f.geometry.type !== "Polygon") continue;
      const ring = (f.geometry.coordinates as number[][][])[0];
      const path = ring
        .map(([lon, lat]) => project({ lat, lon }).map((v) => v.toFixed(1)).join(","))
        .join(" ");
      parts.push(
        `<polygon class="zone" points="${path}" fill="#3fa7d6" ` +
        `fill-opacity="0.15" stroke="#3fa7d6"/>`);
    }
  }

  for (const f of state.facilities) {
    const [x, y] = project(f.position);
    parts.push(
      `<g class="facility" data-id="${esc(f.id)}">` +
      `<path d="M${x - 6},${y} h12 M${x},${y - 6} v12" stroke="#e4f0f5" ` +
      `stroke-width="3"/><title>${esc(f.id)} (role ${f.role})</title></g>`);
  }

  for (const w of state.watercraft) {
    const [x, y] = project(w.position);
    parts.push(
      `<g class="watercraft" data-id="${esc(w.id)}">` +
      `<rect x="${x - 6}" y="${y - 4}" width="12" height="8" fill="#f2c14e"/>` +
      `<title>${esc(w.id)}${w.helipad ? " [helipad]" : ""}` +
      `${w.refuel ? " [refuel]" : ""}</title></g>`);
  }

  for (const r of state.pending_requests) {
    const [x, y] = project(r.position);
    parts.push(
      `<g class="request" data-id="${esc(r.id)}">` +
      `<circle cx="${x}" cy="${y}" r="7" fill="none" stroke="#ef6461" ` +
      `stroke-width="2"/><title>${esc(r.id)} ${esc(r.precedence)}</title></g>`);
  }

  for (const a of state.aircraft) {
    const [x, y] = project(a.position);
    parts.push(
      `<g class="aircraft status-${esc(a.status)}" data-id="${esc(a.id)}">` +
      `<path d="M${x},${y - 7} L${x + 6},${y + 6} L${x - 6},${y + 6} Z" ` +
      `fill="${a.status === "idle" ? "#9bd1a7" : "#6fdc8c"}"/>` +
      `<title>${esc(a.id)} (${esc(a.status)})</title></g>`);
  }

  parts.push("</svg>");
  return parts.join("");
}

export interface WindowSpan {
  kind: "window" | "blackout";
  start: number;
  end: number;
}

// Horizontal strip showing zone coverage windows vs blackouts over a horizon.
export function renderBlackoutStrip(spans: WindowSpan[], horizon: number): string {
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${W} 24" class="blackout-strip">`,
  ];
  for (const s of spans) {
    const x = (s.start / horizon) * W;
    const width = ((s.end - s.start) / horizon) * W;
    const fill = s.kind === "window" ? "#6fdc8c" : "#444b54";
    parts.push(
      `<rect class="${s.kind}" x="${x.toFixed(1)}" y="4" ` +
      `width="${width.toFixed(1)}" height="16" fill="${fill}"/>`);
  }
  parts.push("</svg>");
  return parts.join("");
}
