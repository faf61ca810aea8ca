/**
 * The dashboard controller: one ViewState, four interconnected views.
 *
 * Interaction graph (acyclic, deterministic):
 *   timeline point click        -> run selection -> stack + sunburst update
 *   timeline shift-click        -> comparison pair -> diff view
 *   stack segment click         -> label filter on the timeline
 *   stack bar click             -> run selection
 *   sunburst wedge click        -> path zoom (series + sunburst re-root)
 *
 * No view mutates server state; every displayed number originates from an
 * API payload. In-flight responses superseded by a newer interaction are
 * dropped via sequence numbers.
 */

import {
  ApiClient,
  ApiError,
  LatestOnly,
  type CompareResponse,
  type DiffResponse,
  type LabelsResponse,
  type RunSummary,
  type SeriesResponse,
  type SunburstNode,
} from './api.js'
import { decodeState, encodeState, orderPair, type ViewState } from './state.js'
import { h, type VNode } from './vdom.js'
import { timelineView } from './views/timeline.js'
import { stackView } from './views/stack.js'
import { sunburstView } from './views/sunburst.js'
import { diffView } from './views/diff.js'

const STACK_WINDOW = 12

export class App {
  state: ViewState = {}
  cases: string[] = []
  runs: RunSummary[] = []
  series: SeriesResponse | null = null
  labelsByRun: Record<string, LabelsResponse> = {}
  sunburst: SunburstNode | null = null
  sunburstPair: [SunburstNode, SunburstNode] | null = null
  compare: CompareResponse | null = null
  diff: DiffResponse | null = null
  diffError = ''
  error = ''

  private readonly seriesGuard = new LatestOnly()
  private readonly runGuard = new LatestOnly()
  private readonly pairGuard = new LatestOnly()
  private lastOp: Promise<unknown> = Promise.resolve()

  constructor(
    private readonly api: ApiClient,
    private readonly onChange: (app: App) => void = () => {},
  ) {}

  /** Handlers fire and forget; tests and callers can await quiescence. */
  async idle(): Promise<void> {
    let op
    do {
      op = this.lastOp
      await op.catch(() => {})
    } while (op !== this.lastOp)
  }

  private track(op: Promise<unknown>): void {
    this.lastOp = op
  }

  fragment(): string {
    return encodeState(this.state)
  }

  /** Land on the first case (or the one from a shared link) and render. */
  async start(fragment = ''): Promise<void> {
    this.state = decodeState(fragment)
    this.cases = await this.api.cases()
    const caseName =
      this.state.case && this.cases.includes(this.state.case) ? this.state.case : this.cases[0]
    if (caseName === undefined) {
      this.error = 'the store has no cases yet'
      this.onChange(this)
      return
    }
    await this.selectCase(caseName, { keepState: true })
    if (this.state.run && this.runs.some((r) => r.run_id === this.state.run)) {
      await this.selectRun(this.state.run)
    }
    if (this.state.pair) {
      const [a, b] = this.state.pair
      await this.selectPairByIds(a, b)
    }
  }

  async selectCase(caseName: string, opts: { keepState?: boolean } = {}): Promise<void> {
    if (!opts.keepState) this.state = {}
    this.state.case = caseName
    this.runs = await this.api.runs(caseName, STACK_WINDOW)
    const rootPath = this.runs[0]?.root_path
    if (this.state.path === undefined && rootPath !== undefined) this.state.path = rootPath
    await this.refreshSeries()
    await this.refreshLabels()
    this.onChange(this)
  }

  async selectPath(path: string): Promise<void> {
    this.state.path = path
    await this.refreshSeries()
    if (this.state.run) await this.refreshSunburst()
    this.onChange(this)
  }

  async selectRun(runId: string): Promise<void> {
    this.state.run = runId
    this.state.pair = undefined
    this.compare = null
    this.diff = null
    this.diffError = ''
    this.sunburstPair = null
    await this.refreshSunburst()
    this.onChange(this)
  }

  /** Shift-click: pair the clicked run with the currently selected one. */
  async selectPairWith(runId: string): Promise<void> {
    const first = this.state.run
    if (first === undefined || first === runId) {
      await this.selectRun(runId)
      return
    }
    await this.selectPairByIds(first, runId)
  }

  async selectPairByIds(idA: string, idB: string): Promise<void> {
    const a = this.runs.find((r) => r.run_id === idA)
    const b = this.runs.find((r) => r.run_id === idB)
    if (a === undefined || b === undefined) return
    const [first, second] = orderPair(a, b)
    this.state.pair = [first.run_id, second.run_id]
    this.state.run = first.run_id
    const result = await this.pairGuard.wrap(this.loadPair(first, second))
    if (result === null) return
    ;[this.compare, this.diff, this.diffError, this.sunburstPair] = result
    this.onChange(this)
  }

  private async loadPair(
    first: RunSummary,
    second: RunSummary,
  ): Promise<[CompareResponse, DiffResponse | null, string, [SunburstNode, SunburstNode] | null]> {
    const compare = await this.api.compare(first.run_id, second.run_id)
    let diff: DiffResponse | null = null
    let diffError = ''
    try {
      diff = await this.api.diff(first.commit, second.commit)
    } catch (e) {
      diffError = e instanceof ApiError ? e.message : String(e)
    }
    let pair: [SunburstNode, SunburstNode] | null = null
    try {
      pair = [
        await this.api.sunburst(first.run_id, this.sunburstPath(first)),
        await this.api.sunburst(second.run_id, this.sunburstPath(second)),
      ]
    } catch {
      pair = null
    }
    return [compare, diff, diffError, pair]
  }

  async selectLabel(label: string): Promise<void> {
    this.state.label = this.state.label === label ? undefined : label
    this.onChange(this)
  }

  private sunburstPath(run: RunSummary): string | undefined {
    // zoom only when the selected path exists in that run; else re-root
    return this.state.path && this.state.path !== run.root_path ? this.state.path : undefined
  }

  private async refreshSeries(): Promise<void> {
    if (this.state.case === undefined || this.state.path === undefined) return
    const result = await this.seriesGuard.wrap(
      this.api.series(this.state.case, this.state.path).catch((e) => {
        if (e instanceof ApiError && this.state.path !== this.runs[0]?.root_path) {
          // zoomed path absent from some runs' root: fall back to root
          this.state.path = this.runs[0]?.root_path
          return this.api.series(this.state.case!, this.state.path!)
        }
        throw e
      }),
    )
    if (result !== null) this.series = result
  }

  private async refreshLabels(): Promise<void> {
    const entries = await Promise.all(
      this.runs.map(async (run) => {
        try {
          return [run.run_id, await this.api.labels(run.run_id)] as const
        } catch {
          return null
        }
      }),
    )
    this.labelsByRun = {}
    for (const entry of entries) {
      if (entry !== null) this.labelsByRun[entry[0]] = entry[1]
    }
  }

  private async refreshSunburst(): Promise<void> {
    const runId = this.state.run
    if (runId === undefined) return
    const run = this.runs.find((r) => r.run_id === runId)
    const result = await this.runGuard.wrap(
      this.api.sunburst(runId, run ? this.sunburstPath(run) : undefined).catch(() => null),
    )
    if (result !== null) this.sunburst = result
  }

  /** Timeline under a label filter: per-run label values, API-fetched. */
  labelSeries(label: string): SeriesResponse | null {
    if (this.series === null) return null
    const points = []
    for (const point of this.series.points) {
      const labels = this.labelsByRun[point.run_id]
      if (labels === undefined) continue
      const value = labels.entries[label]
      if (value === undefined) continue
      points.push({
        run_id: point.run_id,
        started_at: point.started_at,
        value,
        class: { kind: 'normal' as const, note: 'label filter: no classification' },
      })
    }
    return { ...this.series, unit: this.series.unit, points, change_points: [] }
  }

  render(): VNode {
    if (this.error) return h('div', { class: 'app error' }, [this.error])
    const series = this.state.label ? this.labelSeries(this.state.label) : this.series
    const caseTabs = h(
      'nav',
      { class: 'cases' },
      this.cases.map((c) =>
        h(
          'button',
          { class: c === this.state.case ? 'case selected' : 'case', 'data-case': c },
          [c],
          { click: () => this.track(this.selectCase(c)) },
        ),
      ),
    )
    const filterNote = this.state.label
      ? h('div', { class: 'label-filter' }, [
          `timeline filtered to label '${this.state.label}' (click the segment again to clear)`,
        ])
      : h('div', {}, [])
    const timeline = timelineView(
      { series, selectedRun: this.state.run },
      {
        onSelect: (runId) => this.track(this.selectRun(runId)),
        onPairSelect: (runId) => this.track(this.selectPairWith(runId)),
      },
    )
    const stack = stackView(
      { runs: this.runs, labelsByRun: this.labelsByRun, selectedRun: this.state.run },
      {
        onSegmentClick: (label) => this.track(this.selectLabel(label)),
        onBarClick: (runId) => this.track(this.selectRun(runId)),
      },
    )
    const sunburst = sunburstView(
      this.sunburstPair !== null
        ? {
            tree: this.sunburstPair[0],
            compareWith: this.sunburstPair[1],
            titles: ['before', 'after'],
          }
        : { tree: this.sunburst },
      { onZoom: (path) => this.track(this.selectPath(path)) },
    )
    const diff = diffView({ compare: this.compare, diff: this.diff, diffError: this.diffError })
    return h('div', { class: 'app' }, [
      caseTabs,
      h('section', { class: 'view view-timeline' }, [heading('timeline', this.state.path), filterNote, timeline]),
      h('section', { class: 'view view-stack' }, [heading('operation types'), stack]),
      h('section', { class: 'view view-sunburst' }, [heading('drill-down'), sunburst]),
      h('section', { class: 'view view-diff' }, [heading('comparison'), diff]),
    ])
  }
}

function heading(title: string, subtitle?: string): VNode {
  return h('h2', {}, subtitle ? [`${title} · ${subtitle}`] : [title])
}
