/**
 * The terminal step of the top-down flow: per-path deltas between the two
 * selected runs, above the unified source diff of their commits (fetched
 * through the server's pluggable VCS command; failures shown verbatim).
 */

import type { CompareResponse, DiffResponse } from '../api.js'
import { h, type VNode } from '../vdom.js'

export interface DiffModel {
  compare: CompareResponse | null
  diff: DiffResponse | null
  diffError?: string
}

export function diffView(model: DiffModel): VNode {
  if (model.compare === null) {
    return h('div', { class: 'diff empty-state' }, [
      'shift-click a second timeline point to compare two runs',
    ])
  }
  const rows = model.compare.rows.map((row) => {
    const cells = [
      h('td', { class: 'path' }, [row.path]),
      h('td', {}, [row.value_a === null ? '—' : row.value_a.toFixed(3)]),
      h('td', {}, [row.value_b === null ? '—' : row.value_b.toFixed(3)]),
      h('td', { class: deltaClass(row.delta) }, [
        row.delta === null ? `absent in ${row.absent_in}` : signed(row.delta),
      ]),
      h('td', {}, [row.relative === null ? '' : `${(row.relative * 100).toFixed(1)}%`]),
    ]
    return h('tr', { 'data-path': row.path }, cells)
  })
  const table = h('table', { class: 'delta-table' }, [
    h('thead', {}, [
      h('tr', {}, ['path', 'before', 'after', 'delta', 'relative'].map((t) => h('th', {}, [t]))),
    ]),
    h('tbody', {}, rows),
  ])

  let diffBlock: VNode
  if (model.diffError) {
    diffBlock = h('pre', { class: 'diff-error' }, [model.diffError])
  } else if (model.diff === null) {
    diffBlock = h('div', { class: 'diff-loading' }, ['fetching commit diff…'])
  } else if (model.diff.diff.trim() === '') {
    diffBlock = h('div', { class: 'diff-empty' }, ['no source changes between these commits'])
  } else {
    diffBlock = h(
      'pre',
      { class: 'source-diff' },
      model.diff.diff.split('\n').map((line) => h('span', { class: lineClass(line) }, [line, '\n'])),
    )
  }

  const [from, to] = model.compare.commits
  return h('div', { class: 'diff' }, [
    h('h3', {}, [`${model.compare.run_a.run_id.slice(0, 10)} → ${model.compare.run_b.run_id.slice(0, 10)}`]),
    table,
    h('h3', {}, [`source diff ${from || '?'} → ${to || '?'}`]),
    diffBlock,
  ])
}

function signed(v: number): string {
  return `${v > 0 ? '+' : ''}${v.toFixed(3)}`
}

function deltaClass(delta: number | null): string {
  if (delta === null) return 'delta absent'
  if (delta > 0) return 'delta worse'
  if (delta < 0) return 'delta better'
  return 'delta'
}

function lineClass(line: string): string {
  if (line.startsWith('+')) return 'line-add'
  if (line.startsWith('-')) return 'line-del'
  if (line.startsWith('@@')) return 'line-hunk'
  return 'line'
}
