/**
 * Browser bootstrap: one configuration value (the API base URL, from the
 * `data-api-base` attribute on the mount node, empty = same origin), state
 * in the URL fragment, full re-render per change.
 */

import { ApiClient } from './api.js'
import { App } from './app.js'
import { mount } from './vdom.js'

const root = document.getElementById('app')
if (root === null) throw new Error('missing #app mount node')
const apiBase = root.dataset.apiBase ?? ''

const app = new App(new ApiClient(apiBase), (a) => {
  root.replaceChildren(mount(a.render(), document))
  const fragment = a.fragment()
  if (fragment !== window.location.hash.replace(/^#/, '')) {
    history.replaceState(null, '', fragment ? `#${fragment}` : '#')
  }
})

window.addEventListener('hashchange', () => {
  void app.start(window.location.hash)
})

void app.start(window.location.hash)
