"""Write sample_kb.manifest.json: attribute -> sorted object names."""
import json
import pathlib

here = pathlib.Path(__file__).parent
aliases = {"mass": "weight", "information": "data"}
out = {}
for line in (here / "sample_kb.txt").read_text().splitlines():
    line = line.strip()
    if not line or line.startswith("#"):
        continue
    name, attr, _value, _source = [f.strip() for f in line.split("|")]
    attr = aliases.get(attr.lower(), attr.lower())
    out.setdefault(attr, set()).add(name)
out = {k: sorted(v) for k, v in sorted(out.items())}
(here / "sample_kb.manifest.json").write_text(json.dumps(out, indent=2) + "\n")
