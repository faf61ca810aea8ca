/**
 * API payload fixtures mirroring the backend's replay scenarios. The
 * integration test exercises the same shapes against the real server, so
 * drift between these stubs and the wire format gets caught there.
 */

import type {
  CompareResponse,
  LabelsResponse,
  RunSummary,
  SeriesResponse,
  SunburstNode,
} from '../src/api.js'

export const GPFS_CASE = 'spray-io'
export const SPIKE_INDEX = 5 // 0-based position of the slow run

export function runId(i: number): string {
  return `run-${String(i).padStart(4, '0')}`
}

function startedAt(i: number): string {
  return `2021-11-01T${String(i).padStart(2, '0')}:00:00.000000Z`
}

export function gpfsRuns(): RunSummary[] {
  return Array.from({ length: 10 }, (_, i) => ({
    run_id: runId(i),
    case: GPFS_CASE,
    iteration: i,
    commit: `c${i}`,
    branch: 'main',
    started_at: startedAt(i),
    root_path: 'execution',
    root_value: i === SPIKE_INDEX ? 135 : 90,
    root_unit: 's',
  }))
}

export function gpfsSeries(): SeriesResponse {
  const runs = gpfsRuns()
  return {
    case: GPFS_CASE,
    path: 'execution',
    unit: 's',
    points: runs.map((r, i) => ({
      run_id: r.run_id,
      started_at: r.started_at,
      value: r.root_value,
      class:
        i === SPIKE_INDEX
          ? { kind: 'transient' as const, direction: 'up', magnitude: 50 }
          : { kind: 'normal' as const },
    })),
    change_points: [],
    params: { window: 20, k: 4.0 },
  }
}

export function gpfsLabels(i: number): LabelsResponse {
  const io = i === SPIKE_INDEX ? 50 : 5
  return {
    run_id: runId(i),
    unit: 's',
    entries: { computation: 60, communication: 20, io, unlabeled: 5 },
  }
}

export function vectorSunburst(correction: number): SunburstNode {
  const solver = correction + 20
  const total = correction + 60
  return {
    path: 'execution',
    name: 'execution',
    value: total,
    fraction: 1,
    self_value: 2,
    children: [
      {
        path: 'execution/assembly', name: 'assembly', value: 30,
        fraction: 30 / total, self_value: 30, children: [],
      },
      {
        path: 'execution/solver', name: 'solver', value: solver,
        fraction: solver / total, self_value: 5,
        children: [
          {
            path: 'execution/solver/velocity_correction', name: 'velocity_correction',
            value: correction, fraction: correction / solver, self_value: correction,
            children: [],
          },
          {
            path: 'execution/solver/pressure', name: 'pressure', value: 15,
            fraction: 15 / solver, self_value: 15, children: [],
          },
        ],
      },
      {
        path: 'execution/io', name: 'io', value: 8,
        fraction: 8 / total, self_value: 8, children: [],
      },
    ],
  }
}

export function vectorCompare(): CompareResponse {
  const [a, b] = [gpfsRuns()[0]!, gpfsRuns()[1]!]
  return {
    run_a: { ...a, commit: 'before' },
    run_b: { ...b, commit: 'after' },
    commits: ['before', 'after'],
    rows: [
      {
        path: 'execution/solver/velocity_correction',
        value_a: 40, value_b: 10, unit: 's', delta: -30, relative: -0.75,
      },
      { path: 'execution/solver', value_a: 60, value_b: 30, unit: 's', delta: -30, relative: -0.5 },
      { path: 'execution', value_a: 100, value_b: 70, unit: 's', delta: -30, relative: -0.3 },
      { path: 'execution/assembly', value_a: 30, value_b: 30, unit: 's', delta: 0, relative: 0 },
      { path: 'execution/gone', value_a: 1, value_b: null, unit: 's', delta: null, relative: null, absent_in: 'b' },
    ],
  }
}
