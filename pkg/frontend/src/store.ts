// Session state: a pure view over received messages. No classification happens
// here; a row is flagged if and only if the scanner sent a bad_request message.

import type {
  BadRequestPayload,
  StreamMessage,
  SummaryPayload,
} from './types.js';

export const MAX_EVENTS = 5000;

export interface EventRow {
  type: StreamMessage['type'];
  pageUrl: string;
  detail: string;
  observedAt: string;
  flagged: boolean;
  payload: StreamMessage['payload'];
}

const REQUIRED_FIELDS: Record<string, string[]> = {
  page: ['page_url'],
  request: ['page_url', 'request_url', 'resource_hint', 'observed_at'],
  bad_request: [
    'page_url', 'request_url', 'matched_pattern', 'group_name',
    'company', 'country', 'service_type', 'resource_hint', 'observed_at',
  ],
  summary: ['requests', 'bad_requests', 'by_company', 'by_country'],
};

function isValid(message: unknown): message is StreamMessage {
  if (typeof message !== 'object' || message === null) return false;
  const candidate = message as { type?: unknown; payload?: unknown };
  if (typeof candidate.type !== 'string') return false;
  const required = REQUIRED_FIELDS[candidate.type];
  if (!required) return false;
  if (typeof candidate.payload !== 'object' || candidate.payload === null) return false;
  const payload = candidate.payload as Record<string, unknown>;
  return required.every((field) => field in payload);
}

export class SessionStore {
  events: EventRow[] = [];
  flagged: BadRequestPayload[] = [];
  companyCounts = new Map<string, number>();
  countryCounts = new Map<string, number>();
  lastSummary: SummaryPayload | null = null;
  evicted = 0;
  received = 0;

  /** Apply one raw message; malformed input is dropped (with a console
   *  diagnostic) and never throws. Returns the row it appended, if any. */
  apply(raw: unknown): EventRow | null {
    if (!isValid(raw)) {
      console.warn('live-monitor: dropped malformed stream message', raw);
      return null;
    }
    this.received += 1;
    const row = this.toRow(raw);
    this.events.push(row);
    if (this.events.length > MAX_EVENTS) {
      this.events.shift();
      this.evicted += 1;
    }
    if (raw.type === 'bad_request') {
      const payload = raw.payload;
      this.flagged.push(payload);
      this.companyCounts.set(payload.company, (this.companyCounts.get(payload.company) ?? 0) + 1);
      this.countryCounts.set(payload.country, (this.countryCounts.get(payload.country) ?? 0) + 1);
    } else if (raw.type === 'summary') {
      this.lastSummary = raw.payload;
    }
    return row;
  }

  private toRow(message: StreamMessage): EventRow {
    switch (message.type) {
      case 'page':
        return {
          type: 'page',
          pageUrl: message.payload.page_url,
          detail: 'navigated',
          observedAt: '',
          flagged: false,
          payload: message.payload,
        };
      case 'request':
      case 'bad_request':
        return {
          type: message.type,
          pageUrl: message.payload.page_url,
          detail: message.payload.request_url,
          observedAt: message.payload.observed_at,
          flagged: message.type === 'bad_request',
          payload: message.payload,
        };
      case 'summary':
        return {
          type: 'summary',
          pageUrl: '',
          detail: `${message.payload.bad_requests} flagged / ${message.payload.requests} requests`,
          observedAt: '',
          flagged: false,
          payload: message.payload,
        };
    }
  }

  flaggedByPage(): Map<string, BadRequestPayload[]> {
    const groups = new Map<string, BadRequestPayload[]>();
    for (const payload of this.flagged) {
      const bucket = groups.get(payload.page_url);
      if (bucket) {
        bucket.push(payload);
      } else {
        groups.set(payload.page_url, [payload]);
      }
    }
    return groups;
  }
}
