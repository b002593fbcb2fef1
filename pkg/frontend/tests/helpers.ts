import { ApiClient, TaskDto } from '../src/api'
import { UiSession } from '../src/session'
import { ADMIN, BASE_URL } from './server'

export async function sessionFor(id: string, secret = 'pw'): Promise<UiSession> {
  return UiSession.login(new ApiClient(BASE_URL), id, secret)
}

export async function adminSession(): Promise<UiSession> {
  return sessionFor(ADMIN.id, ADMIN.secret)
}

export const LICENSE_VARS = { applicant_id: 'A-17', license_no: 'L-88' }

/** Start a license instance as the citizen and complete the submit task. */
export async function startToVerifyStage(citizen: UiSession): Promise<string> {
  const instance = await citizen.api.startInstance('license_renewal', LICENSE_VARS)
  const submit = (await citizen.api.worklist()).find(
    (t) => t.instance === instance.id && t.state === 'pending',
  )
  if (!submit) throw new Error('submit task not found')
  await citizen.api.claim(submit.id)
  await citizen.api.complete(submit.id, LICENSE_VARS)
  return instance.id
}

export function tasksOf(tasks: TaskDto[], instanceIds: string[]): TaskDto[] {
  return tasks.filter((t) => instanceIds.includes(t.instance))
}
