/**
 * Worklist screen: the signed-in principal's queue, refreshed by polling.
 * Claiming is one API call; a 409 (someone else won the task mid-view)
 * surfaces inline and triggers a refresh instead of an error page.
 */

import { ApiError, TaskDto } from '../api.js'
import { UiSession } from '../session.js'

export interface WorklistRow {
  id: string
  activity: string
  instance: string
  state: string
  role: string
  deadline: number
  mine: boolean
}

export class WorklistView {
  tasks: TaskDto[] = []
  message: string | null = null

  constructor(readonly session: UiSession) {}

  async refresh(): Promise<void> {
    this.tasks = await this.session.api.worklist()
  }

  get rows(): WorklistRow[] {
    return this.tasks.map((t) => ({
      id: t.id,
      activity: t.activity,
      instance: t.instance,
      state: t.state,
      role: t.role,
      deadline: t.deadline,
      mine: t.assignee === this.session.principal.id,
    }))
  }

  get pendingCount(): number {
    return this.tasks.filter((t) => t.state === 'pending').length
  }

  async claim(taskId: string): Promise<TaskDto | null> {
    this.message = null
    try {
      const task = await this.session.api.claim(taskId)
      await this.refresh()
      return task
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        this.message = `${error.code}: ${error.message}`
        await this.refresh()
        return null
      }
      throw error
    }
  }
}
