/**
 * Task detail screen: the form fields come straight from the activity's
 * form list (free-text inputs; the DSL carries no type metadata for them),
 * and complete/fail/delegate are each one API call.  The delegate target
 * picker resolves an officer id through the staff directory before acting.
 */

import { ApiError, StaffDto, TaskDto } from '../api.js'
import { UiSession } from '../session.js'

export interface FormField {
  name: string
  value: string
}

export class TaskDetailView {
  task: TaskDto | null = null
  fields: FormField[] = []
  message: string | null = null

  constructor(readonly session: UiSession) {}

  async load(taskId: string): Promise<void> {
    this.task = await this.session.api.task(taskId)
    this.fields = this.task.form.map((name) => ({
      name,
      value: this.task?.input[name] != null ? String(this.task.input[name]) : '',
    }))
  }

  setField(name: string, value: string): void {
    const field = this.fields.find((f) => f.name === name)
    if (field) field.value = value
  }

  /** The action buttons render only for the current assignee. */
  get actionsEnabled(): boolean {
    return (
      this.task?.state === 'claimed' &&
      this.task.assignee === this.session.principal.id
    )
  }

  get renewEnabled(): boolean {
    return (
      this.actionsEnabled &&
      this.task !== null &&
      this.task.renewals_used < this.task.max_renewals
    )
  }

  output(): Record<string, unknown> {
    const out: Record<string, unknown> = {}
    for (const field of this.fields) out[field.name] = coerce(field.value)
    return out
  }

  async complete(): Promise<TaskDto | null> {
    return this.call(() => this.session.api.complete(this.task!.id, this.output()))
  }

  async fail(fault: string): Promise<TaskDto | null> {
    return this.call(() => this.session.api.fail(this.task!.id, fault))
  }

  async lookupDelegate(officerId: string): Promise<StaffDto> {
    return this.session.api.staff(officerId)
  }

  async delegate(to: string): Promise<TaskDto | null> {
    return this.call(() => this.session.api.delegate(this.task!.id, to))
  }

  async renew(): Promise<TaskDto | null> {
    return this.call(() => this.session.api.renew(this.task!.id))
  }

  private async call(action: () => Promise<TaskDto>): Promise<TaskDto | null> {
    this.message = null
    try {
      const task = await action()
      this.task = task
      return task
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        this.message = `${error.code}: ${error.message}`
        if (this.task) await this.load(this.task.id)
        return null
      }
      throw error
    }
  }
}

/** Form inputs are free text; integers and booleans are recognized, the
 * server validates against the declared variable types either way. */
export function coerce(value: string): unknown {
  if (value === 'true') return true
  if (value === 'false') return false
  if (/^-?[0-9]+$/.test(value)) return parseInt(value, 10)
  return value
}
