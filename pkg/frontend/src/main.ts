// Browser bootstrap: wires the client, view model, map, and panels to the DOM.
// All state flows from the server; this file is glue only.

import { OpsClient } from "./client.js";
import { validateRequestForm, serverErrorField, PRECEDENCES } from "./form.js";
import { renderMap } from "./map.js";
import type { RequestForm } from "./types.js";
import { ViewModel } from "./viewmodel.js";
import { candidateWatercraftIds, exploreCandidates, timelineRows } from "./whatif.js";

const client = new OpsClient(window.location.origin.replace(/\/$/, ""));
const vm = new ViewModel();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function refreshState(): Promise<void> {
  const doc = await client.getState();
  if (vm.applyState(doc)) render();
}

function render(): void {
  const state = vm.state;
  if (!state) return;
  el("map").innerHTML = renderMap(state);
  el("clock").textContent = `t = ${state.clock.toFixed(1)} s  rev ${state.revision}`;

  const pending = el<HTMLUListElement>("pending");
  pending.innerHTML = "";
  for (const r of state.pending_requests) {
    const li = document.createElement("li");
    li.textContent = `${r.id} [${r.precedence}] -> ${r.destination}`;
    li.onclick = () => {
      vm.selectRequest(r.id);
      void showRecommendation(r.id);
    };
    pending.appendChild(li);
  }

  const destination = el<HTMLSelectElement>("destination");
  if (destination.options.length !== state.facilities.length) {
    destination.innerHTML = state.facilities
      .map((f) => `<option value="${f.id}">${f.id}</option>`)
      .join("");
  }
}

async function showRecommendation(requestId: string): Promise<void> {
  const rec = await client.recommend(requestId);
  // Rendered byte-for-byte from the response; no client-side re-ranking.
  vm.setRecommendation(rec, JSON.stringify(rec));
  el("recommendation").textContent = JSON.stringify(rec.action, null, 2);
  el("timeline").textContent = rec.predicted_timeline
    .map(([kind, t]) => `${t.toFixed(1).padStart(9)}s  ${kind}`)
    .join("\n");
  el<HTMLButtonElement>("commit").onclick = async () => {
    await client.commit(rec.action);
    await refreshState();
  };
  await showWhatifs(requestId);
}

async function showWhatifs(requestId: string): Promise<void> {
  const state = vm.state;
  if (!state) return;
  const outcomes = await exploreCandidates(client, requestId,
    candidateWatercraftIds(state));
  const panel = el("whatif");
  panel.innerHTML = "";
  for (const o of outcomes) {
    const col = document.createElement("div");
    col.className = o.feasible ? "candidate" : "candidate infeasible";
    const title = o.watercraftId ?? "(planner choice)";
    if (o.feasible && o.result) {
      col.innerHTML = `<h4>${title} — ${o.result.total_time_s?.toFixed(0)}s</h4>` +
        `<pre>${timelineRows(o.result).join("\n")}</pre>`;
    } else {
      col.innerHTML = `<h4>${title}</h4><p class="reason">${o.reason}</p>`;
    }
    panel.appendChild(col);
  }
}

function wireForm(): void {
  const form = el<HTMLFormElement>("request-form");
  form.onsubmit = async (ev) => {
    ev.preventDefault();
    const data: Partial<RequestForm> = {
      id: el<HTMLInputElement>("req-id").value,
      time: vm.state?.clock ?? 0,
      lat: parseFloat(el<HTMLInputElement>("req-lat").value),
      lon: parseFloat(el<HTMLInputElement>("req-lon").value),
      precedence: el<HTMLSelectElement>("precedence").value,
      patient_count: parseInt(el<HTMLInputElement>("patients").value, 10),
      destination: el<HTMLSelectElement>("destination").value,
    };
    const facilities = vm.state?.facilities.map((f) => f.id) ?? [];
    const check = validateRequestForm(data, facilities);
    showFormErrors(check.errors);
    if (!check.ok) return;
    try {
      await client.submitRequest(data as RequestForm);
      form.reset();
      await refreshState();
    } catch (err: any) {
      const field = serverErrorField(err.detail ?? "");
      showFormErrors(field ? { [field]: err.detail } : {});
      if (!field) el("form-error").textContent = err.detail ?? String(err);
    }
  };
}

function showFormErrors(errors: Record<string, string | undefined>): void {
  for (const field of ["id", "lat", "lon", "precedence", "patient_count",
                       "destination", "time"]) {
    const slot = document.getElementById(`err-${field}`);
    if (slot) slot.textContent = errors[field] ?? "";
  }
}

function wirePrecedence(): void {
  el<HTMLSelectElement>("precedence").innerHTML = PRECEDENCES
    .map((p) => `<option value="${p}">${p}</option>`)
    .join("");
}

async function start(): Promise<void> {
  wirePrecedence();
  wireForm();
  el<HTMLButtonElement>("tick").onclick = async () => {
    await client.tick(1);
    await refreshState();
  };
  await refreshState();
  client.subscribe(() => {
    // Every applied mutation bumps the revision; re-hydrate from the source
    // of truth rather than patching locally.
    void refreshState();
  });
}

void start();
