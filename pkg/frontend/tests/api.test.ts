// REST client behavior against a scripted fetch: paths, auth header,
// error normalization.

import { describe, expect, it } from "vitest";

import { PortalApi, PortalApiError } from "../src/api";

interface Call {
  url: string;
  init: RequestInit;
}

function scriptedFetch(
  responses: { status: number; body: unknown }[],
  calls: Call[],
): typeof fetch {
  let k = 0;
  return (async (url: RequestInfo | URL, init?: RequestInit) => {
    calls.push({ url: String(url), init: init ?? {} });
    const scripted = responses[Math.min(k++, responses.length - 1)];
    return new Response(JSON.stringify(scripted.body), {
      status: scripted.status,
      headers: { "Content-Type": "application/json" },
    });
  }) as typeof fetch;
}

describe("portal api client", () => {
  it("sends bearer token and query parameters", async () => {
    const calls: Call[] = [];
    const api = new PortalApi(
      "http://gw:1",
      scriptedFetch([{ status: 200, body: { items: [], total: 0, limit: 100, offset: 0 } }], calls),
    );
    api.token = "sesame";
    await api.resources({ testbed: "r2lab", available: true, limit: 50 });
    expect(calls[0].url).toBe("http://gw:1/api/v1/resources?testbed=r2lab&available=true&limit=50");
    const headers = calls[0].init.headers as Record<string, string>;
    expect(headers["Authorization"]).toBe("Bearer sesame");
  });

  it("login stores the session token", async () => {
    const calls: Call[] = [];
    const api = new PortalApi(
      "http://gw:1/",
      scriptedFetch([{ status: 200, body: { token: "t0k" } }], calls),
    );
    await api.login("onelab.r2lab.alice");
    expect(api.token).toBe("t0k");
    expect(calls[0].url).toBe("http://gw:1/api/v1/auth/login");
    expect(JSON.parse(String(calls[0].init.body))).toEqual({ hrn: "onelab.r2lab.alice" });
  });

  it("normalizes non-2xx answers into PortalApiError", async () => {
    const api = new PortalApi(
      "http://gw:1",
      scriptedFetch([{ status: 403, body: { code: "forbidden", message: "no grant" } }], []),
    );
    const failure = await api.createProject("onelab.r2lab.p1").catch((e) => e);
    expect(failure).toBeInstanceOf(PortalApiError);
    expect(failure.status).toBe(403);
    expect(failure.code).toBe("forbidden");
    expect(failure.message).toBe("no grant");
  });

  it("waitEvent polls until terminal", async () => {
    const pending = { id: "e", version: 1, seq: 1, updated_at: "", body: { status: "pending" } };
    const done = {
      id: "e", version: 3, seq: 3, updated_at: "",
      body: { status: "success", result: { hrn: "x" } },
    };
    const api = new PortalApi(
      "http://gw:1",
      scriptedFetch([
        { status: 200, body: pending },
        { status: 200, body: pending },
        { status: 200, body: done },
      ], []),
    );
    const body = await api.waitEvent("e", 5000, 1);
    expect(body.status).toBe("success");
  });
});
