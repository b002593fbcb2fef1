/**
 * Session state for the signed-in principal.
 *
 * The token lives only in this object (never persisted), and view gating is
 * driven entirely by the privilege list the server computed: the client adds
 * no authorization logic of its own.
 */

import { ApiClient, Principal } from './api.js'

export class UiSession {
  private constructor(
    readonly api: ApiClient,
    readonly principal: Principal,
  ) {}

  static async login(api: ApiClient, id: string, secret: string): Promise<UiSession> {
    const { principal } = await api.login(id, secret)
    const withPrivileges = await api.me()
    return new UiSession(api, withPrivileges ?? principal)
  }

  get displayName(): string {
    return this.principal.name
  }

  get roles(): string[] {
    return this.principal.roles
  }

  hasPrivilege(privilege: string): boolean {
    return this.principal.privileges.includes(privilege)
  }

  /** Which top-level views render for this principal. */
  get visibleViews(): string[] {
    const views = ['worklist', 'tracking']
    if (this.hasPrivilege('supervise')) views.push('dashboard')
    return views
  }

  get canSupervise(): boolean {
    return this.hasPrivilege('supervise')
  }

  logout(): void {
    this.api.setToken(null)
  }
}
