/**
 * A deliberately tiny virtual-node layer.
 *
 * Views are pure functions producing VNode trees, which keeps every render
 * decision unit-testable in node without a browser; mount() turns a tree
 * into real (SVG-aware) DOM in the browser.
 */

export type Handler = (event?: unknown) => void

export interface VNode {
  tag: string
  attrs: Record<string, string | number>
  on: Record<string, Handler>
  children: Array<VNode | string>
}

export function h(
  tag: string,
  attrs: Record<string, string | number> = {},
  children: Array<VNode | string> = [],
  on: Record<string, Handler> = {},
): VNode {
  return { tag, attrs, on, children }
}

export function findAll(root: VNode, predicate: (n: VNode) => boolean): VNode[] {
  const out: VNode[] = []
  const stack: VNode[] = [root]
  while (stack.length > 0) {
    const node = stack.pop()!
    if (predicate(node)) out.push(node)
    for (const child of node.children) {
      if (typeof child !== 'string') stack.push(child)
    }
  }
  return out.reverse()
}

export function byClass(root: VNode, className: string): VNode[] {
  return findAll(root, (n) =>
    String(n.attrs.class ?? '')
      .split(/\s+/)
      .includes(className),
  )
}

export function textOf(node: VNode): string {
  let out = ''
  for (const child of node.children) {
    out += typeof child === 'string' ? child : textOf(child)
  }
  return out
}

const SVG_NS = 'http://www.w3.org/2000/svg'
const SVG_TAGS = new Set([
  'svg', 'g', 'line', 'rect', 'circle', 'path', 'text', 'polyline', 'title',
])

export function mount(node: VNode | string, doc: Document): Node {
  if (typeof node === 'string') return doc.createTextNode(node)
  const el = SVG_TAGS.has(node.tag)
    ? doc.createElementNS(SVG_NS, node.tag)
    : doc.createElement(node.tag)
  for (const [key, value] of Object.entries(node.attrs)) {
    el.setAttribute(key, String(value))
  }
  for (const [event, handler] of Object.entries(node.on)) {
    el.addEventListener(event, handler)
  }
  for (const child of node.children) {
    el.appendChild(mount(child, doc))
  }
  return el
}
