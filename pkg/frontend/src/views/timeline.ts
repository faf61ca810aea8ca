/**
 * The series timeline: the entry point of the top-down flow.
 *
 * Points are marked by their server-side classification (normal dots,
 * transient anomalies as warning diamonds, shift points as squares), change
 * points are drawn as vertical regime boundaries, and clicking a point
 * drives the sibling views. Shift-clicking picks the second run of a
 * comparison pair.
 */

import type { SeriesResponse } from '../api.js'
import { h, type VNode } from '../vdom.js'

export interface TimelineHandlers {
  onSelect(runId: string): void
  onPairSelect(runId: string): void
}

export interface TimelineModel {
  series: SeriesResponse | null
  selectedRun?: string
  width?: number
  height?: number
}

const MARGIN = 24

export function timelineView(model: TimelineModel, handlers: TimelineHandlers): VNode {
  const series = model.series
  if (series === null || series.points.length === 0) {
    return h('div', { class: 'timeline empty-state' }, [
      'no runs recorded for this case and path yet',
    ])
  }
  const width = model.width ?? 640
  const height = model.height ?? 220
  const values = series.points.map((p) => p.value)
  const lo = Math.min(...values)
  const hi = Math.max(...values)
  const span = hi - lo || 1
  const step = (width - 2 * MARGIN) / Math.max(series.points.length - 1, 1)
  const x = (i: number) => MARGIN + i * step
  const y = (v: number) => height - MARGIN - ((v - lo) / span) * (height - 2 * MARGIN)

  const children: VNode[] = []
  children.push(
    h('polyline', {
      class: 'series-line',
      fill: 'none',
      points: series.points.map((p, i) => `${x(i)},${y(p.value)}`).join(' '),
    }),
  )
  for (const cp of series.change_points) {
    const cx = x(cp.index) - step / 2
    children.push(
      h('line', {
        class: 'regime-boundary',
        x1: cx, y1: MARGIN / 2, x2: cx, y2: height - MARGIN / 2,
        'data-index': cp.index,
      }, [h('title', {}, [
        `regime change: ${fmt(cp.before_median)} → ${fmt(cp.after_median)} (score ${cp.score.toFixed(2)})`,
      ])]),
    )
  }
  series.points.forEach((p, i) => {
    const kind = p.class.kind
    const classes = ['point', `point-${kind}`]
    if (p.run_id === model.selectedRun) classes.push('selected')
    const title = `run ${i + 1}: ${fmt(p.value)} ${series.unit} (${kind}${p.class.direction ? ' ' + p.class.direction : ''})`
    children.push(
      h(
        'circle',
        {
          class: classes.join(' '),
          cx: x(i), cy: y(p.value), r: kind === 'normal' ? 3.5 : 6,
          'data-run': p.run_id,
          'data-kind': kind,
          'data-value': p.value,
        },
        [h('title', {}, [title])],
        {
          click: (event) => {
            const ev = event as { shiftKey?: boolean } | undefined
            if (ev && ev.shiftKey) handlers.onPairSelect(p.run_id)
            else handlers.onSelect(p.run_id)
          },
        },
      ),
    )
  })

  return h('div', { class: 'timeline' }, [
    h('svg', { viewBox: `0 0 ${width} ${height}`, width, height, role: 'img' }, children),
    h('div', { class: 'timeline-hint' }, [
      'click a point to drill down, shift-click a second one to compare',
    ]),
  ])
}

function fmt(v: number): string {
  return Number.isInteger(v) ? String(v) : v.toFixed(2)
}
