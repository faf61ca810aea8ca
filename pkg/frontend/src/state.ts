/**
 * The whole dashboard state, serialized into the URL fragment so any view
 * is a shareable link. Nothing else is persisted client-side.
 */

import type { RunSummary } from './api.js'

export interface ViewState {
  case?: string
  path?: string
  run?: string
  pair?: [string, string]
  label?: string
}

export function encodeState(state: ViewState): string {
  const params = new URLSearchParams()
  if (state.case) params.set('case', state.case)
  if (state.path) params.set('path', state.path)
  if (state.run) params.set('run', state.run)
  if (state.pair) params.set('pair', `${state.pair[0]},${state.pair[1]}`)
  if (state.label) params.set('label', state.label)
  return params.toString()
}

export function decodeState(fragment: string): ViewState {
  const params = new URLSearchParams(fragment.replace(/^#/, ''))
  const state: ViewState = {}
  const caseName = params.get('case')
  if (caseName) state.case = caseName
  const path = params.get('path')
  if (path) state.path = path
  const run = params.get('run')
  if (run) state.run = run
  const pair = params.get('pair')
  if (pair && pair.includes(',')) {
    const [a, b] = pair.split(',', 2)
    if (a && b) state.pair = [a, b]
  }
  const label = params.get('label')
  if (label) state.label = label
  return state
}

/** Comparison pairs are always ordered by started_at, oldest first. */
export function orderPair(a: RunSummary, b: RunSummary): [RunSummary, RunSummary] {
  if (a.started_at === b.started_at) {
    return a.run_id <= b.run_id ? [a, b] : [b, a]
  }
  return a.started_at < b.started_at ? [a, b] : [b, a]
}
