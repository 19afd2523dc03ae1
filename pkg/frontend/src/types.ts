// Wire types mirroring the operations service contract.

export interface LatLon {
  lat: number;
  lon: number;
}

export interface AircraftDoc {
  id: string;
  status: "idle" | "enroute" | "on_station" | "returning";
  position: LatLon;
  fuel_range_remaining_m: number;
}

export interface WatercraftDoc {
  id: string;
  helipad: boolean;
  refuel: boolean;
  position: LatLon;
}

export interface FacilityDoc {
  id: string;
  role: number;
  position: LatLon;
}

export interface RequestDoc {
  id: string;
  time: number;
  precedence: string;
  patient_count: number;
  destination: string;
  position: LatLon;
}

export interface StateDoc {
  revision: number;
  clock: number;
  scenario: string;
  terminal: boolean;
  aircraft: AircraftDoc[];
  watercraft: WatercraftDoc[];
  facilities: FacilityDoc[];
  pending_requests: RequestDoc[];
  in_transit: { request_id: string; carrier: string; leg: string }[];
  delivered: { request_id: string; time: number }[];
}

export interface ActionDoc {
  kind: string;
  aircraft_id: string | null;
  request_id: string | null;
  axp_watercraft_id: string | null;
  receiving_aircraft_id: string | null;
  launch_time: number;
}

export interface RecommendationDoc {
  action: ActionDoc;
  estimated_return: number;
  visit_counts: [ActionDoc, number][];
  predicted_timeline: [string, number][];
}

export interface WhatifDoc {
  action: ActionDoc;
  timeline: [string, number][];
  total_time_s: number | null;
}

export interface RevisionEvent {
  revision: number;
  event: { kind: string; [key: string]: unknown };
}

export interface RequestForm {
  id: string;
  time: number;
  lat: number;
  lon: number;
  precedence: string;
  patient_count: number;
  destination: string;
}
