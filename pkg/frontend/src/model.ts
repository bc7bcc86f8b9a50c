/**
 * Panel state: the newest robot state wins, everything else is derived.
 */

import { Ack, RobotState } from "./schema.js";

export interface RejectionNotice {
  code: string;
  detail: string;
}

export class UiStore {
  latest: RobotState | null = null;
  jogStep = 20;
  lastRejection: RejectionNotice | null = null;
  private staleDropped = 0;

  /** Adopt a state frame; frames older than the current one are discarded. */
  accept(state: RobotState): boolean {
    if (this.latest !== null && state.seq <= this.latest.seq) {
      this.staleDropped += 1;
      return false;
    }
    this.latest = state;
    return true;
  }

  acceptAck(ack: Ack): void {
    if (!ack.ok) {
      this.lastRejection = { code: ack.code ?? "unknown", detail: ack.detail ?? "" };
    }
  }

  clearRejection(): void {
    this.lastRejection = null;
  }

  get staleFramesDropped(): number {
    return this.staleDropped;
  }

  /** While a trajectory runs, motion controls conflict with it; stop never does. */
  motionControlsEnabled(): boolean {
    return this.latest !== null && (this.latest.mode === "idle" || this.latest.mode === "jog");
  }

  faulted(): boolean {
    return this.latest?.mode === "fault";
  }
}
