/** Tiny SVG inspection helpers for the test suite (string-level, no DOM). */

export type AttrMap = Record<string, string>;

/** All elements of a tag, as attribute maps (self-closing or not). */
export function elements(svg: string, tag: string): AttrMap[] {
  const out: AttrMap[] = [];
  const re = new RegExp(`<${tag}\\b([^>]*?)/?>`, "g");
  for (const match of svg.matchAll(re)) {
    const attrs: AttrMap = {};
    for (const a of match[1]!.matchAll(/([\w:-]+)="([^"]*)"/g)) {
      attrs[a[1]!] = a[2]!;
    }
    out.push(attrs);
  }
  return out;
}

/** Text content of every <text> element. */
export function textContents(svg: string): string[] {
  return [...svg.matchAll(/<text\b[^>]*>([^<]*)<\/text>/g)].map((m) => m[1]!);
}
