#!/usr/bin/env python3
"""Download a benchmark dataset and record where it came from.

Datasets are not shipped with the repository. This script fetches one file,
writes it under the output directory and appends a provenance record
(URL, SHA-256, size, UTC time) to `provenance.json` next to it.

Example:
    scripts/fetch_dataset.py --name banana --url <csv or libsvm url> --out data
"""

import argparse
import datetime
import hashlib
import json
import pathlib
import urllib.request


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--name", required=True, help="dataset name, used as the file stem")
    p.add_argument("--url", required=True, help="source URL")
    p.add_argument("--out", default="data", help="output directory (default: data)")
    p.add_argument("--format", choices=["csv", "libsvm"], default="csv")
    p.add_argument("--sha256", help="expected digest; the download is rejected on mismatch")
    args = p.parse_args()

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with urllib.request.urlopen(args.url) as r:
        body = r.read()
    digest = hashlib.sha256(body).hexdigest()
    if args.sha256 and digest != args.sha256.lower():
        raise SystemExit(f"sha256 mismatch: got {digest}, expected {args.sha256}")

    path = out / f"{args.name}.{args.format}"
    path.write_bytes(body)

    log = out / "provenance.json"
    records = json.loads(log.read_text()) if log.exists() else []
    records.append({
        "name": args.name,
        "file": path.name,
        "url": args.url,
        "format": args.format,
        "sha256": digest,
        "bytes": len(body),
        "fetched_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
    })
    log.write_text(json.dumps(records, indent=2) + "\n")
    print(f"{path}: {len(body)} bytes, sha256 {digest}")


if __name__ == "__main__":
    main()
