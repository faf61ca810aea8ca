import { describe, expect, it } from 'vitest'

import { stackView } from '../src/views/stack.js'
import { byClass, textOf } from '../src/vdom.js'
import { GPFS_CASE, gpfsLabels, gpfsRuns, runId, SPIKE_INDEX } from './fixtures.js'

const noop = { onSegmentClick: () => {}, onBarClick: () => {} }

function gpfsModel() {
  const runs = gpfsRuns()
  const labelsByRun = Object.fromEntries(runs.map((r, i) => [r.run_id, gpfsLabels(i)]))
  return { runs, labelsByRun }
}

describe('stacked label bars', () => {
  it('renders one bar per run with one segment per label', () => {
    const view = stackView(gpfsModel(), noop)
    expect(byClass(view, 'bar')).toHaveLength(10)
    const segments = byClass(view, 'segment')
    expect(segments).toHaveLength(40) // 4 labels x 10 runs
  })

  it('spike run io segment carries the API value', () => {
    const view = stackView(gpfsModel(), noop)
    const ioSpike = byClass(view, 'segment').filter(
      (s) => s.attrs['data-run'] === runId(SPIKE_INDEX) && s.attrs['data-label'] === 'io',
    )
    expect(ioSpike).toHaveLength(1)
    expect(ioSpike[0]!.attrs['data-value']).toBe(50)
    expect(textOf(ioSpike[0]!)).toContain('50.00')
  })

  it('bar heights are proportional to the run totals', () => {
    const view = stackView(gpfsModel(), noop)
    const heightOf = (run: string) =>
      byClass(view, 'segment')
        .filter((s) => s.attrs['data-run'] === run)
        .reduce((acc, s) => acc + Number(s.attrs.height), 0)
    const normal = heightOf(runId(0))
    const spike = heightOf(runId(SPIKE_INDEX))
    // totals are 90 s vs 135 s
    expect(spike / normal).toBeCloseTo(135 / 90, 5)
  })

  it('all-unlabeled runs collapse to a single segment', () => {
    const runs = gpfsRuns().slice(0, 1)
    const labelsByRun = {
      [runs[0]!.run_id]: { run_id: runs[0]!.run_id, unit: 's', entries: { unlabeled: 90 } },
    }
    const view = stackView({ runs, labelsByRun }, noop)
    const segments = byClass(view, 'segment')
    expect(segments).toHaveLength(1)
    expect(segments[0]!.attrs['data-label']).toBe('unlabeled')
  })

  it('mixed units yield an explanatory empty state', () => {
    const model = gpfsModel()
    model.labelsByRun[runId(2)] = { run_id: runId(2), unit: 'MiB', entries: { io: 1 } }
    const view = stackView(model, noop)
    const state = byClass(view, 'empty-state')
    expect(state).toHaveLength(1)
    expect(textOf(state[0]!)).toContain('MiB')
  })

  it('segment clicks filter by label, bar clicks select the run', () => {
    const labels: string[] = []
    const bars: string[] = []
    const view = stackView(gpfsModel(), {
      onSegmentClick: (label) => labels.push(label),
      onBarClick: (id) => bars.push(id),
    })
    byClass(view, 'segment')
      .find((s) => s.attrs['data-label'] === 'io')!
      .on.click!()
    byClass(view, 'bar')[3]!.on.click!()
    expect(labels).toEqual(['io'])
    expect(bars).toEqual([runId(3)])
  })

  it('legend lists every label', () => {
    const view = stackView(gpfsModel(), noop)
    const legend = byClass(view, 'legend-entry').map(textOf)
    expect(legend).toEqual(['communication', 'computation', 'io', 'unlabeled'])
  })

  it('empty model renders empty state', () => {
    const view = stackView({ runs: [], labelsByRun: {} }, noop)
    expect(byClass(view, 'empty-state')).toHaveLength(1)
  })
})
