/**
 * Sunburst drill-down: the hierarchy as concentric rings, wedge angles
 * proportional to values from the sunburst endpoint (never recomputed).
 * Clicking a wedge zooms the view onto that subtree; side-by-side mode
 * renders two runs for before/after stories.
 */

import type { SunburstNode } from '../api.js'
import { h, type VNode } from '../vdom.js'

export interface Wedge {
  node: SunburstNode
  depth: number
  start: number // radians
  end: number
}

/** Angular layout: children split the parent span by value, self keeps the rest. */
export function sunburstLayout(root: SunburstNode): Wedge[] {
  const wedges: Wedge[] = []

  function place(node: SunburstNode, depth: number, start: number, end: number): void {
    wedges.push({ node, depth, start, end })
    const span = end - start
    let cursor = start
    for (const child of node.children) {
      const childSpan = node.value > 0 ? span * (child.value / node.value) : 0
      place(child, depth + 1, cursor, cursor + childSpan)
      cursor += childSpan
    }
  }

  place(root, 0, 0, 2 * Math.PI)
  return wedges
}

function polar(cx: number, cy: number, r: number, angle: number): [number, number] {
  return [cx + r * Math.cos(angle - Math.PI / 2), cy + r * Math.sin(angle - Math.PI / 2)]
}

/** SVG path for a ring sector; a full turn degenerates to two half arcs. */
export function arcPath(
  cx: number, cy: number, r0: number, r1: number, start: number, end: number,
): string {
  const full = end - start >= 2 * Math.PI - 1e-9
  if (full) end = start + 2 * Math.PI - 1e-6
  const [x0, y0] = polar(cx, cy, r1, start)
  const [x1, y1] = polar(cx, cy, r1, end)
  const [x2, y2] = polar(cx, cy, r0, end)
  const [x3, y3] = polar(cx, cy, r0, start)
  const large = end - start > Math.PI ? 1 : 0
  return [
    `M ${x0.toFixed(3)} ${y0.toFixed(3)}`,
    `A ${r1} ${r1} 0 ${large} 1 ${x1.toFixed(3)} ${y1.toFixed(3)}`,
    `L ${x2.toFixed(3)} ${y2.toFixed(3)}`,
    `A ${r0} ${r0} 0 ${large} 0 ${x3.toFixed(3)} ${y3.toFixed(3)}`,
    'Z',
  ].join(' ')
}

export interface SunburstHandlers {
  onZoom(path: string): void
}

export interface SunburstModel {
  tree: SunburstNode | null
  compareWith?: SunburstNode | null // side-by-side before/after
  size?: number
  titles?: [string, string]
}

const RING = 34

export function sunburstView(model: SunburstModel, handlers: SunburstHandlers): VNode {
  if (model.tree === null) {
    return h('div', { class: 'sunburst empty-state' }, ['select a run to unfold its hierarchy'])
  }
  const size = model.size ?? 280
  const charts: VNode[] = [oneSunburst(model.tree, size, handlers, model.titles?.[0] ?? '')]
  if (model.compareWith) {
    charts.push(oneSunburst(model.compareWith, size, handlers, model.titles?.[1] ?? ''))
  }
  return h('div', { class: `sunburst${model.compareWith ? ' side-by-side' : ''}` }, charts)
}

function oneSunburst(
  tree: SunburstNode, size: number, handlers: SunburstHandlers, caption: string,
): VNode {
  const cx = size / 2
  const cy = size / 2
  const wedges = sunburstLayout(tree)
  const maxDepth = Math.max(...wedges.map((w) => w.depth))
  const ring = Math.min(RING, (size / 2 - 8) / (maxDepth + 1))
  const shapes = wedges.map((w) => {
    const r0 = w.depth * ring
    const r1 = (w.depth + 1) * ring
    const title = `${w.node.path}: ${w.node.value.toFixed(2)} (${(w.node.fraction * 100).toFixed(1)}% of parent)`
    return h(
      'path',
      {
        class: `wedge depth-${w.depth % 6}`,
        d: arcPath(cx, cy, r0, r1, w.start, w.end),
        'data-path': w.node.path,
        'data-value': w.node.value,
        'data-angle': w.end - w.start,
      },
      [h('title', {}, [title])],
      { click: () => handlers.onZoom(w.node.path) },
    )
  })
  const children: VNode[] = [
    h('svg', { viewBox: `0 0 ${size} ${size}`, width: size, height: size, role: 'img' }, shapes),
  ]
  if (caption) children.push(h('div', { class: 'caption' }, [caption]))
  return h('div', { class: 'sunburst-chart' }, children)
}
