/**
 * Stacked bars of time per operation type, one bar per run in the window.
 *
 * Bar heights equal the root duration (the label totals conserve it
 * server-side), segment heights are the per-label values straight from the
 * labels endpoint, and hovering reveals the exact numbers. Clicking a
 * segment filters the timeline onto that label's aggregate series.
 */

import type { LabelsResponse, RunSummary } from '../api.js'
import { h, type VNode } from '../vdom.js'

export interface StackHandlers {
  onSegmentClick(label: string): void
  onBarClick(runId: string): void
}

export interface StackModel {
  runs: RunSummary[]
  labelsByRun: Record<string, LabelsResponse>
  selectedRun?: string
  width?: number
  height?: number
}

const PALETTE = [
  '#4e79a7', '#f28e2b', '#e15759', '#76b7b2', '#59a14f',
  '#edc948', '#b07aa1', '#ff9da7', '#9c755f', '#bab0ac',
]

export function labelColors(labels: string[]): Record<string, string> {
  const colors: Record<string, string> = {}
  const sorted = [...labels].sort()
  sorted.forEach((label, i) => {
    colors[label] = label === 'unlabeled' ? '#d0d0d0' : PALETTE[i % PALETTE.length]!
  })
  return colors
}

export function stackView(model: StackModel, handlers: StackHandlers): VNode {
  const runs = model.runs.filter((r) => model.labelsByRun[r.run_id] !== undefined)
  if (runs.length === 0) {
    return h('div', { class: 'stack empty-state' }, ['no label data for the runs in view'])
  }
  const units = new Set(runs.map((r) => model.labelsByRun[r.run_id]!.unit))
  if (units.size > 1) {
    return h('div', { class: 'stack empty-state' }, [
      `runs mix units (${[...units].join(', ')}); stacked bars need a single unit`,
    ])
  }
  const width = model.width ?? 640
  const height = model.height ?? 220
  const margin = 24
  const allLabels = new Set<string>()
  for (const run of runs) {
    for (const label of Object.keys(model.labelsByRun[run.run_id]!.entries)) allLabels.add(label)
  }
  const colors = labelColors([...allLabels])
  const maxTotal = Math.max(
    ...runs.map((r) => sumEntries(model.labelsByRun[r.run_id]!.entries)),
  )
  const slot = (width - 2 * margin) / runs.length
  const barWidth = Math.min(slot * 0.7, 48)
  const scale = (height - 2 * margin) / (maxTotal || 1)

  const bars: VNode[] = []
  runs.forEach((run, i) => {
    const entries = model.labelsByRun[run.run_id]!.entries
    const x = margin + i * slot + (slot - barWidth) / 2
    let yCursor = height - margin
    const segments: VNode[] = []
    for (const label of Object.keys(entries).sort()) {
      const value = entries[label]!
      const segHeight = value * scale
      yCursor -= segHeight
      segments.push(
        h(
          'rect',
          {
            class: 'segment',
            x, y: yCursor, width: barWidth, height: segHeight,
            fill: colors[label]!,
            'data-run': run.run_id,
            'data-label': label,
            'data-value': value,
          },
          [h('title', {}, [`run ${i + 1} ${label}: ${value.toFixed(2)}`])],
          { click: () => handlers.onSegmentClick(label) },
        ),
      )
    }
    const barClasses = ['bar', run.run_id === model.selectedRun ? 'selected' : '']
    bars.push(
      h(
        'g',
        { class: barClasses.join(' ').trim(), 'data-run': run.run_id },
        segments,
        { click: () => handlers.onBarClick(run.run_id) },
      ),
    )
  })

  const legend = h(
    'div',
    { class: 'legend' },
    [...allLabels].sort().map((label) =>
      h('span', { class: 'legend-entry', style: `--swatch: ${colors[label]}` }, [label]),
    ),
  )
  return h('div', { class: 'stack' }, [
    h('svg', { viewBox: `0 0 ${width} ${height}`, width, height, role: 'img' }, bars),
    legend,
  ])
}

function sumEntries(entries: Record<string, number>): number {
  return Object.values(entries).reduce((a, b) => a + b, 0)
}
