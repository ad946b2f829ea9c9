/**
 * Preset-to-figure wiring: which files each preset produces and how they are
 * rendered. One entry point per preset; unknown presets fail loudly.
 */

import { existsSync, readdirSync } from "node:fs";
import { join } from "node:path";

import { SchemaError, readJson, readTable, readTrajectories } from "./csv.js";
import {
  ScalingPanelSpec,
  clickHistogram,
  densitySnapshots,
  scalingLogLog,
  stepCurve,
  trajectoryOverlay,
  trajectoryPlane,
} from "./plots.js";

export function renderPreset(preset: string, inDir: string): { name: string; svg: string } {
  const renderer = RENDERERS[preset];
  if (!renderer) {
    throw new SchemaError(`no figure defined for preset '${preset}' ` +
      `(have ${Object.keys(RENDERERS).sort().join(", ")})`);
  }
  return { name: `${preset}.svg`, svg: renderer(inDir) };
}

export function presetNames(): string[] {
  return Object.keys(RENDERERS).sort();
}

const RENDERERS: Record<string, (dir: string) => string> = {
  fig1: (dir) => {
    const files = readdirSync(dir).filter((f) => /^density_t.*\.csv$/.test(f)).sort();
    if (files.length === 0) throw new SchemaError(`${dir}: no density_t*.csv snapshots`);
    const tables = files.map((f) => ({
      label: f.replace("density_", "").replace(".csv", ""),
      table: readTable(join(dir, f)),
    }));
    return densitySnapshots(tables, "No-jump evolution of a monitored particle at rest");
  },

  "fig2-free": (dir) =>
    trajectoryOverlay(
      readTrajectories(join(dir, "trajectories.jsonl")),
      maybeTable(join(dir, "mean_x.csv")),
      "Free particle on a sparse lattice: click trajectories",
    ),

  "fig2-harmonic": (dir) =>
    trajectoryOverlay(
      readTrajectories(join(dir, "trajectories.jsonl")),
      maybeTable(join(dir, "mean_x.csv")),
      "Harmonic trap: oscillating click trajectories",
    ),

  fig3: (dir) =>
    trajectoryPlane(
      readTrajectories(join(dir, "trajectories.jsonl")),
      "Circular-state trajectories in the position plane",
    ),

  fig4: (dir) =>
    clickHistogram(
      readTable(join(dir, "first_click_hist.csv")),
      readTable(join(dir, "f_t1.csv")),
      "First-click time distribution vs renewal density",
    ),

  fig5: (dir) =>
    stepCurve(readTable(join(dir, "mean_x.csv")),
              "Two-detector step profile", null),

  fig6: (dir) =>
    stepCurve(readTable(join(dir, "mean_x.csv")),
              "Mean clicked position and retardation",
              readJson(join(dir, "retardation.json"))),

  fig7: (dir) => {
    const scaling = readJson(join(dir, "scaling.json")) as Record<
      string, { exp_x?: number; exp_k?: number }>;
    const spec = (tag: string, obs: "x" | "k"): ScalingPanelSpec => {
      const expKey = obs === "x" ? "exp_x" : "exp_k";
      const entry = scaling[tag] ?? {};
      const e = entry[expKey];
      return {
        label: `${tag} std_${obs}`,
        mean: readTable(join(dir, `stats_${tag}_${obs}.csv`)),
        std: readTable(join(dir, `stats_${tag}_${obs}.csv`)),
        fit: typeof e === "number" ? { exponent: e, label: `t^${e.toFixed(2)}` } : undefined,
      };
    };
    return scalingLogLog(
      spec("jump_dense", "x"), spec("jump_dense", "k"),
      spec("filter_dense", "x"), spec("filter_dense", "k"),
      "Dispersion scaling: projector jumps vs spatial filtering",
    );
  },
};

function maybeTable(path: string) {
  return existsSync(path) ? readTable(path) : null;
}
