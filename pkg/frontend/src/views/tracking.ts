/**
 * Citizen tracking screen: start a request, follow its event timeline, and
 * read delivered notifications.  The timeline is the server's event list
 * verbatim; nothing is synthesized client-side.
 */

import { DefinitionDto, DefinitionSummary, EventDto, InstanceDto, MessageDto } from '../api.js'
import { UiSession } from '../session.js'
import { coerce } from './task.js'

export interface TimelineEntry {
  seq: number
  at: number
  kind: string
  actor: string
  summary: string
}

export class TrackingView {
  definitions: DefinitionSummary[] = []
  startForm: { name: string; type: string; required: boolean; value: string }[] = []
  instance: InstanceDto | null = null
  timeline: TimelineEntry[] = []
  outbox: MessageDto[] = []

  constructor(readonly session: UiSession) {}

  async loadDefinitions(): Promise<void> {
    this.definitions = await this.session.api.definitions()
  }

  async prepareStart(definitionId: string, version: number): Promise<DefinitionDto> {
    const definition = await this.session.api.definition(definitionId, version)
    this.startForm = definition.variables.map((v) => ({ ...v, value: '' }))
    return definition
  }

  setStartField(name: string, value: string): void {
    const field = this.startForm.find((f) => f.name === name)
    if (field) field.value = value
  }

  async start(definitionId: string): Promise<InstanceDto> {
    const variables: Record<string, unknown> = {}
    for (const field of this.startForm) {
      if (field.value !== '') variables[field.name] = coerce(field.value)
    }
    this.instance = await this.session.api.startInstance(definitionId, variables)
    await this.session.api.subscribe(this.instance.id)
    await this.refresh()
    return this.instance
  }

  async open(instanceId: string): Promise<void> {
    this.instance = await this.session.api.instance(instanceId)
    await this.refresh()
  }

  async refresh(): Promise<void> {
    if (!this.instance) return
    const events = await this.session.api.events(this.instance.id)
    this.timeline = events.map((e: EventDto) => ({
      seq: e.seq,
      at: e.at,
      kind: e.kind,
      actor: e.actor,
      summary: summarize(e),
    }))
    this.outbox = await this.session.api.outbox()
    this.instance = await this.session.api.instance(this.instance.id)
  }
}

function summarize(event: EventDto): string {
  const activity = event.payload['activity']
  if (typeof activity === 'string') return `${event.kind} (${activity})`
  return event.kind
}
