import { describe, expect, it } from "vitest";

import { AdvisorClient, ServiceError } from "../src/api.js";

function fakeFetch(
  handler: (url: string, init?: RequestInit) => { status: number; body: unknown },
): typeof fetch {
  return (async (url: RequestInfo | URL, init?: RequestInit) => {
    const { status, body } = handler(String(url), init);
    return new Response(JSON.stringify(body), {
      status,
      headers: { "content-type": "application/json" },
    });
  }) as typeof fetch;
}

describe("advisor client", () => {
  it("reads health and instance metadata", async () => {
    const client = new AdvisorClient(
      "http://svc",
      fakeFetch((url) => {
        if (url.endsWith("/health")) {
          return { status: 200, body: { status: "ok", version: "0.1.0", instance: "abc" } };
        }
        return {
          status: 200,
          body: { facility_labels: ["A", "B"], num_facilities: 2 },
        };
      }),
    );
    expect((await client.health()).status).toBe("ok");
    expect((await client.instance()).facility_labels).toEqual(["A", "B"]);
  });

  it("sends recommendation requests as JSON", async () => {
    let captured: RequestInit | undefined;
    const client = new AdvisorClient(
      "http://svc",
      fakeFetch((url, init) => {
        captured = init;
        return {
          status: 200,
          body: { action: 1, facility: "A", loss: false, policy: "myopic" },
        };
      }),
    );
    const resp = await client.recommend({
      patient_type: 1,
      availability: [true, false],
      policy: "myopic",
    });
    expect(resp.action).toBe(1);
    expect(captured?.method).toBe("POST");
    expect(JSON.parse(String(captured?.body))).toEqual({
      patient_type: 1,
      availability: [true, false],
      policy: "myopic",
    });
  });

  it("surfaces HTTP errors with status and detail", async () => {
    const client = new AdvisorClient(
      "http://svc",
      fakeFetch(() => ({ status: 422, body: { detail: "unknown policy" } })),
    );
    await expect(
      client.recommend({ patient_type: 1, availability: [true], policy: "myopic" }),
    ).rejects.toMatchObject({ status: 422 });
  });

  it("maps network failure to a status-less ServiceError", async () => {
    const failing = (async () => {
      throw new TypeError("connect ECONNREFUSED");
    }) as unknown as typeof fetch;
    const client = new AdvisorClient("http://down", failing);
    const err = await client.health().catch((e) => e);
    expect(err).toBeInstanceOf(ServiceError);
    expect(err.status).toBeNull();
    expect(String(err.message)).toContain("unreachable");
  });
});
