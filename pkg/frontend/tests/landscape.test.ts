import { describe, expect, it } from "vitest";

import type { ClusterSummary } from "../src/api.js";
import {
  buildLandscape,
  chipLabel,
  renderClusterDetail,
  renderLandscape,
  setFilter,
  setSort,
  visibleRows,
} from "../src/landscape.js";

const NOW = "2016-05-20T12:00:00Z";

function cluster(partial: Partial<ClusterSummary> & { id: number }): ClusterSummary {
  return {
    exemplar_text: `exemplar ${partial.id}`,
    member_count: 1,
    wts: 1.0,
    tags: ['osint:source-type="microblog-post"'],
    created_at: "2016-05-18T10:00:00Z",
    last_update: "2016-05-18T10:00:00Z",
    ...partial,
  };
}

describe("buildLandscape", () => {
  it("creates one row per cluster from a single snapshot", () => {
    const view = buildLandscape([cluster({ id: 1 }), cluster({ id: 2 }), cluster({ id: 3 })], NOW);
    expect(view.rows).toHaveLength(3);
    expect(view.rows.map((r) => r.clusterId)).toEqual([1, 2, 3]);
  });

  it("defaults to last_update descending", () => {
    const view = buildLandscape(
      [
        cluster({ id: 1, last_update: "2016-05-18T10:00:00Z" }),
        cluster({ id: 2, last_update: "2016-05-19T10:00:00Z" }),
      ],
      NOW,
    );
    expect(visibleRows(view).map((r) => r.clusterId)).toEqual([2, 1]);
  });

  it("derives the age column from the API timestamps", () => {
    const view = buildLandscape(
      [cluster({ id: 1, last_update: "2016-05-18T10:00:00Z" })],
      NOW,
    );
    expect(view.rows[0].age).toBe("2 days");
  });
});

describe("sorting and filtering", () => {
  const view = buildLandscape(
    [
      cluster({ id: 1, member_count: 5, exemplar_text: "Cisco DoS advisory", tags: ['veris:action:hacking:variety="DoS"'] }),
      cluster({ id: 2, member_count: 9, exemplar_text: "WordPress upload flaw" }),
      cluster({ id: 3, member_count: 2, exemplar_text: "Linux kernel patch" }),
    ],
    NOW,
  );

  it("sorts by the chosen column and toggles direction", () => {
    let sorted = setSort(view, "member_count");
    expect(visibleRows(sorted).map((r) => r.clusterId)).toEqual([2, 1, 3]);
    sorted = setSort(sorted, "member_count");
    expect(visibleRows(sorted).map((r) => r.clusterId)).toEqual([3, 1, 2]);
  });

  it("filters by exemplar text or tag, case-insensitively", () => {
    expect(visibleRows(setFilter(view, "wordpress")).map((r) => r.clusterId)).toEqual([2]);
    expect(visibleRows(setFilter(view, "dos")).map((r) => r.clusterId)).toEqual([1]);
    expect(visibleRows(setFilter(view, ""))).toHaveLength(3);
  });

  it("does not mutate the underlying snapshot rows", () => {
    const filtered = setFilter(view, "linux");
    expect(filtered.rows).toHaveLength(3);
    expect(view.filter).toBe("");
  });
});

describe("renderLandscape", () => {
  it("renders an explanatory message for an empty state", () => {
    const html = renderLandscape(buildLandscape([], NOW));
    expect(html).toContain("landscape-empty");
    expect(html).toContain("no active threats yet");
  });

  it("renders one table row per cluster with tag chips", () => {
    const html = renderLandscape(
      buildLandscape(
        [
          cluster({
            id: 7,
            exemplar_text: "Cisco Web Security Appliance DoS",
            tags: ['veris:action:hacking:variety="DoS"', 'osint:source-type="microblog-post"'],
          }),
          cluster({ id: 8 }),
        ],
        NOW,
      ),
    );
    expect(html.match(/<tr data-cluster-id=/g)).toHaveLength(2);
    expect(html).toContain('<span class="chip"');
    expect(html).toContain("DoS</span>");
  });

  it("escapes exemplar text", () => {
    const html = renderLandscape(
      buildLandscape([cluster({ id: 1, exemplar_text: "<script>alert(1)</script>" })], NOW),
    );
    expect(html).not.toContain("<script>alert");
    expect(html).toContain("&lt;script&gt;");
  });
});

describe("chipLabel", () => {
  it("extracts the quoted value of a machine tag", () => {
    expect(chipLabel('veris:action:hacking:variety="DoS"')).toBe("DoS");
  });
  it("falls back to the last namespace segment", () => {
    expect(chipLabel("threat-type:exploit")).toBe("exploit");
    expect(chipLabel("plain")).toBe("plain");
  });
});

describe("renderClusterDetail", () => {
  it("lists all member posts", () => {
    const html = renderClusterDetail({
      ...cluster({ id: 4, member_count: 2 }),
      members: [
        { post_id: "a", text: "first post", timestamp: "2016-05-18T10:00:00Z" },
        { post_id: "b", text: "second post", timestamp: "2016-05-18T11:00:00Z" },
      ],
    });
    expect(html).toContain("first post");
    expect(html).toContain("second post");
    expect(html).toContain("Cluster 4");
  });
});
