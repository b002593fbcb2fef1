/**
 * Typed client for the civicflow HTTP facade.
 *
 * Every UI action is exactly one call here; errors carry the server's stable
 * code (NotPending, RoleMismatch, ...) so views can surface them verbatim.
 */

export interface Principal {
  id: string
  name: string
  kind: string
  roles: string[]
  privileges: string[]
  properties: Record<string, string>
}

export interface TaskDto {
  id: string
  instance: string
  activity: string
  state: 'pending' | 'claimed' | 'completed' | 'failed'
  role: string
  assignee: string | null
  input: Record<string, unknown>
  output: Record<string, unknown> | null
  fault: string | null
  deadline: number
  renewals_used: number
  max_renewals: number
  form: string[]
  history: { at: number; actor: string; action: string }[]
}

export interface InstanceDto {
  id: string
  definition: { id: string; version: number }
  state: 'running' | 'completed' | 'terminated'
  active: string[]
  created_at: number
  closed_at: number | null
  initiator: string
}

export interface EventDto {
  seq: number
  at: number
  instance: string
  task: string | null
  actor: string
  kind: string
  payload: Record<string, unknown>
}

export interface MessageDto {
  id: string
  subscription: string
  event_seq: number
  kind: string
  rendered: string
  status: 'queued' | 'delivered' | 'dead'
}

export interface StaffDto {
  officer_id: string
  name: string
  role: string
  department: string
}

export interface SnapshotDto {
  definitions: Record<string, { running: number; completed: number; terminated: number }>
  open_tasks: Record<string, number>
  overdue: {
    task: string
    instance: string
    activity: string
    role: string
    assignee: string | null
    deadline: number
  }[]
  now: number
}

export interface DefinitionDto {
  id: string
  version: number
  name: string
  variables: { name: string; type: string; required: boolean }[]
  activities: { id: string; kind: string; role: string | null; form: string[] }[]
}

export interface DefinitionSummary {
  id: string
  version: number
  name: string
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message)
  }
}

export class ApiClient {
  private token: string | null = null

  constructor(readonly baseUrl: string = '') {}

  setToken(token: string | null): void {
    this.token = token
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {}
    if (this.token) headers['X-Auth-Token'] = this.token
    let payload: string | undefined
    if (body !== undefined) {
      if (typeof body === 'string') {
        headers['Content-Type'] = 'text/plain'
        payload = body
      } else {
        headers['Content-Type'] = 'application/json'
        payload = JSON.stringify(body)
      }
    }
    const response = await fetch(this.baseUrl + path, { method, headers, body: payload })
    const text = await response.text()
    const data = text ? JSON.parse(text) : null
    if (!response.ok) {
      const code = data?.error ?? String(response.status)
      const message = data?.message ?? data?.detail ?? response.statusText
      throw new ApiError(response.status, code, message)
    }
    return data as T
  }

  async login(id: string, secret: string): Promise<{ token: string; principal: Principal }> {
    const result = await this.request<{ token: string; principal: Principal }>(
      'POST',
      '/auth/login',
      { id, secret },
    )
    this.setToken(result.token)
    return result
  }

  me(): Promise<Principal> {
    return this.request('GET', '/me')
  }

  worklist(): Promise<TaskDto[]> {
    return this.request('GET', '/worklist')
  }

  task(taskId: string): Promise<TaskDto> {
    return this.request('GET', `/tasks/${taskId}`)
  }

  claim(taskId: string): Promise<TaskDto> {
    return this.request('POST', `/tasks/${taskId}/claim`, {})
  }

  complete(taskId: string, output: Record<string, unknown>): Promise<TaskDto> {
    return this.request('POST', `/tasks/${taskId}/complete`, { output })
  }

  fail(taskId: string, fault: string): Promise<TaskDto> {
    return this.request('POST', `/tasks/${taskId}/fail`, { fault })
  }

  delegate(taskId: string, to: string): Promise<TaskDto> {
    return this.request('POST', `/tasks/${taskId}/delegate`, { to })
  }

  renew(taskId: string): Promise<TaskDto> {
    return this.request('POST', `/tasks/${taskId}/renew`, {})
  }

  definitions(): Promise<DefinitionSummary[]> {
    return this.request('GET', '/definitions')
  }

  definition(id: string, version: number): Promise<DefinitionDto> {
    return this.request('GET', `/definitions/${id}/${version}`)
  }

  startInstance(definition: string, variables: Record<string, unknown>): Promise<InstanceDto> {
    return this.request('POST', '/instances', { definition, variables })
  }

  instance(instanceId: string): Promise<InstanceDto> {
    return this.request('GET', `/instances/${instanceId}`)
  }

  events(instanceId: string): Promise<EventDto[]> {
    return this.request('GET', `/instances/${instanceId}/events`)
  }

  outbox(): Promise<MessageDto[]> {
    return this.request('GET', '/outbox')
  }

  subscribe(instance: string, channel = 'outbox-file'): Promise<{ id: string }> {
    return this.request('POST', '/subscriptions', { channel, instance })
  }

  staff(officerId: string): Promise<StaffDto> {
    return this.request('GET', `/staff/${officerId}`)
  }

  snapshot(): Promise<SnapshotDto> {
    return this.request('GET', '/admin/snapshot')
  }

  terminate(instanceId: string, reason: string): Promise<InstanceDto> {
    return this.request('POST', `/admin/instances/${instanceId}/terminate`, { reason })
  }
}
