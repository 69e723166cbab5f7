"""Download the four MNIST IDX files into data/mnist/.

The data loader reads the gzipped files as-is, so nothing is unpacked.
Point BADGE_MNIST at the same directory (or keep the default location)
and the MNIST-dependent tests stop skipping.
"""

import argparse
import os
import sys
import urllib.error
import urllib.request

FILES = (
    "train-images-idx3-ubyte.gz",
    "train-labels-idx1-ubyte.gz",
    "t10k-images-idx3-ubyte.gz",
    "t10k-labels-idx1-ubyte.gz",
)
MIRRORS = (
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "https://storage.googleapis.com/cvdf-datasets/mnist/",
)


def fetch(name, dest, mirrors):
    for base in mirrors:
        url = base + name
        try:
            with urllib.request.urlopen(url, timeout=60) as resp:
                blob = resp.read()
        except (urllib.error.URLError, OSError) as exc:
            print("  %s: %s" % (url, exc), file=sys.stderr)
            continue
        with open(dest, "wb") as fh:
            fh.write(blob)
        print("  %s (%d bytes) <- %s" % (dest, len(blob), url))
        return True
    return False


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dir", default=os.path.join("data", "mnist"))
    args = parser.parse_args()
    os.makedirs(args.dir, exist_ok=True)
    failed = []
    for name in FILES:
        dest = os.path.join(args.dir, name)
        if os.path.exists(dest):
            print("  %s already present" % dest)
            continue
        if not fetch(name, dest, MIRRORS):
            failed.append(name)
    if failed:
        print("failed to download: %s" % ", ".join(failed), file=sys.stderr)
        return 1
    print("done; set BADGE_MNIST=%s if this is not the default location"
          % os.path.abspath(args.dir))
    return 0


if __name__ == "__main__":
    sys.exit(main())
