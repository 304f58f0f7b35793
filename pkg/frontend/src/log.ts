// Session log of entered discharges and the operator's final choice.

export interface SessionLogEntry {
  timestamp: string;
  patientType: number | string;
  availability: boolean[];
  // recommendation per policy the operator asked for
  recommendations: Record<string, number>;
  chosenAction: number;
  // set when the operator picked something other than the displayed
  // recommendation of the active policy
  divergedFrom: string | null;
}

export class SessionLog {
  private entries: SessionLogEntry[] = [];

  record(entry: Omit<SessionLogEntry, "timestamp" | "divergedFrom"> & {
    activePolicy: string;
  }): SessionLogEntry {
    const { activePolicy, ...rest } = entry;
    const rec = entry.recommendations[activePolicy];
    if (entry.chosenAction !== 0 && entry.availability[entry.chosenAction - 1] !== true) {
      throw new Error(
        `chosen facility ${entry.chosenAction} was not available at entry time`,
      );
    }
    const full: SessionLogEntry = {
      ...rest,
      timestamp: new Date().toISOString(),
      divergedFrom: rec !== undefined && rec !== entry.chosenAction ? activePolicy : null,
    };
    this.entries.push(full);
    return full;
  }

  all(): readonly SessionLogEntry[] {
    return this.entries;
  }

  /** CSV matching the service decision-log schema. */
  toCsv(): string {
    const lines = ["timestamp,patient_type,availability,policy,action"];
    for (const e of this.entries) {
      const avail = e.availability.map((b) => (b ? "1" : "0")).join("");
      const policy = e.divergedFrom ? `operator(diverged:${e.divergedFrom})` : "operator";
      lines.push(`${e.timestamp},${e.patientType},${avail},${policy},${e.chosenAction}`);
    }
    return lines.join("\n") + "\n";
  }
}
