/**
 * Supervisor dashboard: instance counts per definition, open tasks by state,
 * the overdue list, and the terminate action.  Renders only for principals
 * whose server-reported privileges include supervise.
 */

import { ApiError, SnapshotDto } from '../api.js'
import { UiSession } from '../session.js'

export class DashboardView {
  snapshot: SnapshotDto | null = null
  message: string | null = null

  constructor(readonly session: UiSession) {}

  /** Server-mirrored gate; a forced call without the privilege gets a 403. */
  get visible(): boolean {
    return this.session.canSupervise
  }

  async refresh(): Promise<void> {
    this.snapshot = await this.session.api.snapshot()
  }

  runningCount(definitionId: string): number {
    return this.snapshot?.definitions[definitionId]?.running ?? 0
  }

  get overdue(): SnapshotDto['overdue'] {
    return this.snapshot?.overdue ?? []
  }

  async terminate(instanceId: string, reason: string): Promise<boolean> {
    this.message = null
    try {
      await this.session.api.terminate(instanceId, reason)
      await this.refresh()
      return true
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        this.message = `${error.code}: ${error.message}`
        await this.refresh()
        return false
      }
      throw error
    }
  }
}
