/** Wire types mirroring the service's JSON responses. */

export interface SpatialExtent {
  west: number;
  east: number;
  south: number;
  north: number;
}

export interface TemporalExtent {
  start: string;
  end: string;
}

export interface SearchHit {
  record_id: string;
  score: number;
  title: string;
  provider_key: string;
  spatial?: SpatialExtent;
  temporal?: TemporalExtent;
}

export interface KeywordFacet {
  keyword: string;
  count: number;
}

export interface SearchResult {
  total: number;
  hits: SearchHit[];
  facets: {
    providers: Record<string, number>;
    keywords: KeywordFacet[];
  };
}

export interface AttributeRow {
  name: string;
  unit: string;
  precision?: string;
  accuracy?: string;
}

export interface MetadataRecord {
  record_id: string;
  provider_key: string;
  local_identifier: string;
  title: string;
  abstract: string;
  keywords: string[];
  attributes: AttributeRow[];
  lineage: string;
  spatial?: SpatialExtent;
  temporal?: TemporalExtent;
  source_url?: string;
  datestamp: string;
  deleted: boolean;
}

export interface ApiError {
  status: number;
  code: string;
  message: string;
}
