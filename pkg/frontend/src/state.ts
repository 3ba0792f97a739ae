// View state: layer visibility, viewport, and the control-point picking
// flow. A pair only exists once both endpoints are picked; a second pick
// on the same trajectory resets the pending pair with a notice.

import type { ControlPointPair, LayerPayload } from "./api.js";

export const ALL_LAYERS = [
  "slam_trajectory",
  "gnss_trajectory",
  "vm_lanelets",
  "vm_centerlines",
  "osm_ways",
  "matches",
  "validation",
  "triangulation",
  "point_cloud",
] as const;

export type LayerName = (typeof ALL_LAYERS)[number];

export interface Viewport {
  centerX: number;
  centerY: number;
  scale: number; // pixels per meter
}

export type PickResult =
  | { kind: "pending"; source: [number, number] }
  | { kind: "pair"; pair: ControlPointPair }
  | { kind: "reset"; notice: string }
  | { kind: "ignored" };

export class ViewState {
  visible: Set<LayerName> = new Set([
    "slam_trajectory",
    "gnss_trajectory",
    "vm_lanelets",
    "validation",
    "triangulation",
  ]);
  viewport: Viewport = { centerX: 0, centerY: 0, scale: 2 };
  layers: Map<LayerName, LayerPayload> = new Map();
  pairs: ControlPointPair[] = [];
  pendingSource: [number, number] | null = null;
  selectedId: number | string | null = null;
  notice = "";

  toggleLayer(name: LayerName, on?: boolean): void {
    const enable = on ?? !this.visible.has(name);
    if (enable) this.visible.add(name);
    else this.visible.delete(name);
  }

  setLayer(payload: LayerPayload): void {
    this.layers.set(payload.layer as LayerName, payload);
  }

  worldToScreen(x: number, y: number, w: number, h: number): [number, number] {
    const { centerX, centerY, scale } = this.viewport;
    // y grows north; the canvas grows down
    return [w / 2 + (x - centerX) * scale, h / 2 - (y - centerY) * scale];
  }

  screenToWorld(px: number, py: number, w: number, h: number): [number, number] {
    const { centerX, centerY, scale } = this.viewport;
    return [centerX + (px - w / 2) / scale, centerY - (py - h / 2) / scale];
  }

  fitTo(coords: [number, number][], w: number, h: number): void {
    if (!coords.length) return;
    let minX = Infinity, minY = Infinity, maxX = -Infinity, maxY = -Infinity;
    for (const [x, y] of coords) {
      minX = Math.min(minX, x); maxX = Math.max(maxX, x);
      minY = Math.min(minY, y); maxY = Math.max(maxY, y);
    }
    this.viewport.centerX = (minX + maxX) / 2;
    this.viewport.centerY = (minY + maxY) / 2;
    const spanX = Math.max(1, maxX - minX), spanY = Math.max(1, maxY - minY);
    this.viewport.scale = 0.9 * Math.min(w / spanX, h / spanY);
  }

  /** Nearest vertex of a polyline layer within `tol` meters, or null. */
  nearestOnLayer(layer: LayerName, x: number, y: number, tol: number):
      { point: [number, number]; dist: number } | null {
    const payload = this.layers.get(layer);
    if (!payload) return null;
    let best: { point: [number, number]; dist: number } | null = null;
    for (const f of payload.features) {
      for (const [px, py] of f.coordinates) {
        const d = Math.hypot(px - x, py - y);
        if (d <= tol && (best === null || d < best.dist)) {
          best = { point: [px, py], dist: d };
        }
      }
    }
    return best;
  }

  /**
   * Control-point picking: first click snaps to the SLAM trajectory,
   * the second to the GNSS trajectory, committing a pair.
   */
  pick(x: number, y: number, tolMeters: number): PickResult {
    const onSlam = this.nearestOnLayer("slam_trajectory", x, y, tolMeters);
    const onGnss = this.nearestOnLayer("gnss_trajectory", x, y, tolMeters);
    if (this.pendingSource === null) {
      if (onSlam && (!onGnss || onSlam.dist <= onGnss.dist)) {
        this.pendingSource = onSlam.point;
        this.notice = "source picked; now pick the matching GNSS point";
        return { kind: "pending", source: onSlam.point };
      }
      if (onGnss) {
        this.notice = "pick the SLAM point first";
        return { kind: "reset", notice: this.notice };
      }
      return { kind: "ignored" };
    }
    // awaiting the GNSS endpoint
    if (onGnss && (!onSlam || onGnss.dist < onSlam.dist)) {
      const pair: ControlPointPair = {
        source: this.pendingSource,
        target: onGnss.point,
      };
      this.pairs.push(pair);
      this.pendingSource = null;
      this.notice = `pair ${this.pairs.length} added`;
      return { kind: "pair", pair };
    }
    if (onSlam) {
      this.pendingSource = null;
      this.notice = "picked the SLAM trajectory twice; pending pair reset";
      return { kind: "reset", notice: this.notice };
    }
    return { kind: "ignored" };
  }

  cancelPending(): void {
    this.pendingSource = null;
    this.notice = "pending pair cancelled";
  }
}
