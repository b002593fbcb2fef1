/**
 * Browser entry point: login, tab navigation, and a polling loop that keeps
 * the active view fresh (default every 5 seconds, configurable via the
 * `data-poll-ms` attribute on the mount node).
 */

import { ApiClient, ApiError, TaskDto } from './api.js'
import { button, clear, el, formatWhen } from './dom.js'
import { UiSession } from './session.js'
import { DashboardView } from './views/dashboard.js'
import { TaskDetailView } from './views/task.js'
import { TrackingView } from './views/tracking.js'
import { WorklistView } from './views/worklist.js'

const DEFAULT_POLL_MS = 5000

type Tab = 'worklist' | 'tracking' | 'dashboard'

class App {
  session: UiSession | null = null
  tab: Tab = 'worklist'
  worklist: WorklistView | null = null
  taskDetail: TaskDetailView | null = null
  tracking: TrackingView | null = null
  dashboard: DashboardView | null = null
  private timer: number | null = null

  constructor(
    readonly root: HTMLElement,
    readonly api: ApiClient,
    readonly pollMs: number,
  ) {}

  async login(id: string, secret: string): Promise<void> {
    this.session = await UiSession.login(this.api, id, secret)
    this.worklist = new WorklistView(this.session)
    this.taskDetail = new TaskDetailView(this.session)
    this.tracking = new TrackingView(this.session)
    this.dashboard = new DashboardView(this.session)
    await this.worklist.refresh()
    await this.tracking.loadDefinitions()
    this.startPolling()
    this.render()
  }

  startPolling(): void {
    if (this.timer !== null) window.clearInterval(this.timer)
    this.timer = window.setInterval(() => void this.poll(), this.pollMs)
  }

  async poll(): Promise<void> {
    if (!this.session) return
    try {
      if (this.tab === 'worklist') await this.worklist?.refresh()
      else if (this.tab === 'tracking') await this.tracking?.refresh()
      else if (this.dashboard?.visible) await this.dashboard.refresh()
      this.render()
    } catch (error) {
      if (error instanceof ApiError && error.status === 401) this.logout()
      else throw error
    }
  }

  logout(): void {
    if (this.timer !== null) window.clearInterval(this.timer)
    this.session?.logout()
    this.session = null
    this.render()
  }

  render(): void {
    clear(this.root)
    if (!this.session) {
      this.root.append(this.renderLogin())
      return
    }
    this.root.append(this.renderNav())
    const message = el('div', { class: 'message' })
    this.root.append(message)
    if (this.tab === 'worklist') this.root.append(this.renderWorklist(message))
    else if (this.tab === 'tracking') this.root.append(this.renderTracking())
    else this.root.append(this.renderDashboard(message))
  }

  private renderLogin(): HTMLElement {
    const id = el('input', { placeholder: 'user id', id: 'login-id' })
    const secret = el('input', { placeholder: 'secret', type: 'password', id: 'login-secret' })
    const error = el('div', { class: 'error' })
    const submit = button('Sign in', () => {
      this.login(id.value, secret.value).catch((e) => {
        error.textContent = e instanceof ApiError ? `${e.code}: ${e.message}` : String(e)
      })
    })
    return el('div', { class: 'login' }, [
      el('h1', {}, ['civicflow']),
      id,
      secret,
      submit,
      error,
    ])
  }

  private renderNav(): HTMLElement {
    const session = this.session!
    const tabs = session.visibleViews.map((view) =>
      button(
        view,
        () => {
          this.tab = view as Tab
          void this.poll()
        },
        this.tab === view ? 'tab active' : 'tab',
      ),
    )
    return el('nav', {}, [
      el('span', { class: 'who' }, [`${session.displayName} (${session.roles.join(', ')})`]),
      ...tabs,
      button('sign out', () => this.logout(), 'tab'),
    ])
  }

  private renderWorklist(message: HTMLElement): HTMLElement {
    const view = this.worklist!
    if (view.message) message.textContent = view.message
    const rows = view.rows.map((row) => {
      const actions: Node[] = []
      if (row.state === 'pending') {
        actions.push(
          button('claim', () => {
            void view.claim(row.id).then((task) => {
              if (task) void this.openTask(task)
              else this.render()
            })
          }),
        )
      } else if (row.mine) {
        actions.push(button('open', () => void this.openTaskById(row.id)))
      }
      return el('tr', {}, [
        el('td', {}, [row.activity]),
        el('td', {}, [row.state]),
        el('td', {}, [row.role]),
        el('td', {}, [formatWhen(row.deadline)]),
        el('td', {}, actions),
      ])
    })
    const table = el('table', { class: 'worklist' }, [
      el('tr', {}, ['activity', 'state', 'role', 'deadline', ''].map((h) => el('th', {}, [h]))),
      ...rows,
    ])
    const detail = this.taskDetail?.task ? this.renderTaskDetail() : el('div')
    return el('div', {}, [table, detail])
  }

  private async openTaskById(taskId: string): Promise<void> {
    await this.taskDetail!.load(taskId)
    this.render()
  }

  private async openTask(task: TaskDto): Promise<void> {
    await this.taskDetail!.load(task.id)
    this.render()
  }

  private renderTaskDetail(): HTMLElement {
    const view = this.taskDetail!
    const task = view.task!
    const fields = view.fields.map((field) => {
      const input = el('input', { value: field.value, id: `field-${field.name}` })
      input.addEventListener('input', () => view.setField(field.name, input.value))
      return el('label', {}, [field.name, input])
    })
    const error = el('div', { class: 'error' }, [view.message ?? ''])
    const actions: Node[] = []
    if (view.actionsEnabled) {
      actions.push(
        button('complete', () => void view.complete().then(() => this.poll())),
        button('fail', () => {
          const fault = window.prompt('fault message') ?? 'failed'
          void view.fail(fault).then(() => this.poll())
        }),
        button('delegate', () => {
          const officer = window.prompt('officer id (see staff directory)') ?? ''
          if (!officer) return
          void view
            .lookupDelegate(officer)
            .then((staff) => {
              if (window.confirm(`Delegate to ${staff.name} (${staff.role})?`)) {
                return view.delegate(officer).then(() => this.poll())
              }
              return undefined
            })
            .catch((e) => {
              view.message = e instanceof ApiError ? `${e.code}: ${e.message}` : String(e)
              this.render()
            })
        }),
      )
      if (view.renewEnabled) {
        actions.push(button('renew', () => void view.renew().then(() => this.poll())))
      }
    }
    return el('div', { class: 'task-detail' }, [
      el('h2', {}, [`${task.activity} [${task.state}]`]),
      el('div', {}, fields),
      el('div', { class: 'actions' }, actions),
      error,
    ])
  }

  private renderTracking(): HTMLElement {
    const view = this.tracking!
    const options = view.definitions.map((d) =>
      el('option', { value: `${d.id}:${d.version}` }, [`${d.name} (v${d.version})`]),
    )
    const select = el('select', { id: 'definition-pick' }, options)
    const startButton = button('start request', () => {
      const [id, version] = select.value.split(':')
      if (!id || !version) return
      void view.prepareStart(id, parseInt(version, 10)).then(() => this.render())
    })
    const startFields = view.startForm.map((field) => {
      const input = el('input', { value: field.value, id: `start-${field.name}` })
      input.addEventListener('input', () => view.setStartField(field.name, input.value))
      return el('label', {}, [`${field.name}${field.required ? ' *' : ''}`, input])
    })
    const submit =
      view.startForm.length > 0
        ? button('submit', () => {
            const [id] = select.value.split(':')
            if (id) void view.start(id).then(() => this.render())
          })
        : el('span')
    const timeline = view.timeline.map((entry) =>
      el('li', {}, [`#${entry.seq} ${formatWhen(entry.at)} — ${entry.summary} (${entry.actor})`]),
    )
    const outbox = view.outbox.map((m) => el('li', {}, [m.rendered]))
    return el('div', { class: 'tracking' }, [
      el('div', {}, [select, startButton, ...startFields, submit]),
      el('h2', {}, [view.instance ? `Request ${view.instance.id} — ${view.instance.state}` : '']),
      el('ol', { class: 'timeline' }, timeline),
      el('h3', {}, [outbox.length ? 'Notifications' : '']),
      el('ul', { class: 'outbox' }, outbox),
    ])
  }

  private renderDashboard(message: HTMLElement): HTMLElement {
    const view = this.dashboard!
    if (!view.visible) return el('div', {}, ['not available'])
    if (view.message) message.textContent = view.message
    const snapshot = view.snapshot
    const defs = Object.entries(snapshot?.definitions ?? {}).map(([id, counts]) =>
      el('tr', {}, [
        el('td', {}, [id]),
        el('td', {}, [String(counts.running)]),
        el('td', {}, [String(counts.completed)]),
        el('td', {}, [String(counts.terminated)]),
      ]),
    )
    const overdue = view.overdue.map((item) =>
      el('tr', {}, [
        el('td', {}, [item.activity]),
        el('td', {}, [item.role]),
        el('td', {}, [item.assignee ?? '—']),
        el('td', {}, [formatWhen(item.deadline)]),
        el('td', {}, [
          button('terminate', () => {
            const reason = window.prompt('reason') ?? ''
            void view.terminate(item.instance, reason).then(() => this.render())
          }),
        ]),
      ]),
    )
    return el('div', { class: 'dashboard' }, [
      el('table', {}, [
        el('tr', {}, ['definition', 'running', 'completed', 'terminated'].map((h) => el('th', {}, [h]))),
        ...defs,
      ]),
      el('h3', {}, ['Overdue tasks']),
      el('table', {}, [
        el('tr', {}, ['activity', 'role', 'assignee', 'deadline', ''].map((h) => el('th', {}, [h]))),
        ...overdue,
      ]),
    ])
  }
}

export function mount(root: HTMLElement): App {
  const pollMs = parseInt(root.dataset['pollMs'] ?? String(DEFAULT_POLL_MS), 10)
  const app = new App(root, new ApiClient(''), pollMs)
  app.render()
  return app
}

declare global {
  interface Window {
    civicflow?: App
  }
}

if (typeof document !== 'undefined') {
  const root = document.getElementById('app')
  if (root) window.civicflow = mount(root)
}
