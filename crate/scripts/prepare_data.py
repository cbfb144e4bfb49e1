#!/usr/bin/env python3
"""Materialize MovieLens 100K and an offline category index under data/.

The ratings and item tables are taken from the copy bundled inside the
pytorch-widedeep wheel (fetched with `pip download` when not cached), and
written back out in the original `u.data` / `u.item` layouts.

The category index is a proxy built from MovieLens' own genre and release
metadata, in the `page_id \t title \t cat;cat;...` layout the linker reads.
About 10% of items are deliberately left out of the index, and a share of
pages carry disambiguated titles with a same-named non-film decoy so the
keyword tie-break has real work to do.
"""

import argparse
import glob
import hashlib
import io
import os
import re
import subprocess
import sys
import tempfile
import zipfile

import pandas as pd

WHEEL = "pytorch-widedeep==1.7.0"
MEMBER = "pytorch_widedeep/datasets/data/MovieLens100k_{}.parquet.brotli"
GENRES = [
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
    "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
]
GENRE_CATEGORY = {
    "Action": "action", "Adventure": "adventure", "Animation": "animated",
    "Children's": "children's", "Comedy": "comedy", "Crime": "crime",
    "Documentary": "documentary", "Drama": "drama", "Fantasy": "fantasy",
    "Film-Noir": "film noir", "Horror": "horror", "Musical": "musical",
    "Mystery": "mystery", "Romance": "romance", "Sci-Fi": "science fiction",
    "Thriller": "thriller", "War": "war", "Western": "Western",
}
DECOY_CATEGORIES = [
    ["English-language novels", "Novels set in the United States"],
    ["Songs written by various artists", "1980s songs"],
    ["Disambiguation pages"],
    ["American television series", "English-language television shows"],
]


def wheel_path(cache):
    hits = glob.glob(os.path.join(cache, "pytorch_widedeep-*.whl"))
    if hits:
        return hits[0]
    subprocess.check_call(
        [sys.executable, "-m", "pip", "download", "--no-deps", "-d", cache, WHEEL]
    )
    return glob.glob(os.path.join(cache, "pytorch_widedeep-*.whl"))[0]


def bucket(movie_id, salt):
    h = hashlib.sha256(f"{salt}:{movie_id}".encode()).digest()
    return int.from_bytes(h[:4], "little")


def clean_title(raw):
    m = re.match(r"^(.*?)\s*\((\d{4})\)\s*$", raw)
    title, year = (m.group(1), m.group(2)) if m else (raw.strip(), None)
    m = re.match(r"^(.*), (The|A|An)$", title)
    if m:
        title = f"{m.group(2)} {m.group(1)}"
    return title, year


def write_index(items, path):
    rows = []
    page = 1000
    for rec in items.itertuples(index=False):
        mid = int(rec.movie_id)
        raw = rec.movie_title or ""
        genres = [g for g in GENRES if int(getattr(rec, g.replace("'", "").replace("-", "_"), 0) or 0)]
        if not raw.strip() or genres == ["unknown"] or bucket(mid, "omit") % 10 == 0:
            continue
        title, year = clean_title(raw)
        if year is None:
            date = rec.release_date or ""
            year = date[-4:] if len(date) >= 4 and date[-4:].isdigit() else None
        cats = []
        if year:
            cats.append(f"{year} films")
            cats.append(f"Films of the {year[:3]}0s")
        for g in genres:
            if g in GENRE_CATEGORY:
                cats.append(f"{GENRE_CATEGORY[g]} films".capitalize()
                            if g != "Western" else "Western (genre) films")
                if year:
                    cats.append(f"{year[:3]}0s {GENRE_CATEGORY[g]} films")
        style = bucket(mid, "style") % 4
        if style == 0 and year:
            page_title = f"{title} ({year} film)"
        elif style == 1:
            page_title = f"{title} (film)"
        else:
            page_title = title
        page += 1
        rows.append((page, page_title, cats))
        if style in (0, 1):
            page += 1
            decoy = DECOY_CATEGORIES[bucket(mid, "decoy") % len(DECOY_CATEGORIES)]
            rows.append((page, title, decoy))
    seen = set()
    with open(path, "w", encoding="utf-8") as f:
        for pid, t, cats in rows:
            uniq = [c for c in dict.fromkeys(cats)]
            f.write(f"{pid}\t{t}\t{';'.join(uniq)}\n")
            seen.add(t)
    return len(rows)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data"))
    ap.add_argument("--cache", default=os.path.join(tempfile.gettempdir(), "wikisvd-wheel"))
    args = ap.parse_args()
    os.makedirs(args.cache, exist_ok=True)
    ml_dir = os.path.join(args.out, "ml-100k")
    wiki_dir = os.path.join(args.out, "wiki")
    os.makedirs(ml_dir, exist_ok=True)
    os.makedirs(wiki_dir, exist_ok=True)

    z = zipfile.ZipFile(wheel_path(args.cache))
    ratings = pd.read_parquet(io.BytesIO(z.read(MEMBER.format("data"))))
    items = pd.read_parquet(io.BytesIO(z.read(MEMBER.format("items"))))

    with open(os.path.join(ml_dir, "u.data"), "w") as f:
        for r in ratings.itertuples(index=False):
            f.write(f"{r.user_id}\t{r.movie_id}\t{r.rating}\t{r.timestamp}\n")

    items = items.rename(columns=lambda c: c.replace("'", "").replace("-", "_"))
    with open(os.path.join(ml_dir, "u.item"), "w", encoding="utf-8") as f:
        for rec in items.itertuples(index=False):
            flags = [str(int(getattr(rec, g.replace("'", "").replace("-", "_")))) for g in GENRES]
            fields = [
                str(rec.movie_id), rec.movie_title or "", rec.release_date or "",
                rec.video_release_date or "", rec.IMDb_URL or "",
            ] + flags
            f.write("|".join("" if v is None or v != v else str(v) for v in fields) + "\n")

    n_pages = write_index(items, os.path.join(wiki_dir, "ml100k_category_index.tsv"))
    print(f"ratings: {len(ratings)}  items: {len(items)}  index pages: {n_pages}")


if __name__ == "__main__":
    main()
