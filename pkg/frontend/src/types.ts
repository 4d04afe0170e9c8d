// Wire format of the scanner's live event stream (line-delimited JSON over WebSocket).

export type MessageType = 'page' | 'request' | 'bad_request' | 'summary';

export interface PagePayload {
  page_url: string;
}

export interface RequestPayload {
  page_url: string;
  request_url: string;
  resource_hint: string;
  observed_at: string;
}

export interface BadRequestPayload extends RequestPayload {
  matched_pattern: string;
  group_name: string;
  company: string;
  country: string;
  service_type: string;
}

export interface SummaryPayload {
  pages: number;
  requests: number;
  bad_requests: number;
  by_company: Record<string, number>;
  by_country: Record<string, number>;
}

export type StreamMessage =
  | { type: 'page'; payload: PagePayload }
  | { type: 'request'; payload: RequestPayload }
  | { type: 'bad_request'; payload: BadRequestPayload }
  | { type: 'summary'; payload: SummaryPayload };

export type ConnectionStatus = 'connecting' | 'open' | 'closed';
