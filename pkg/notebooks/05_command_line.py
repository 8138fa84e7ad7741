# %% [markdown]
# # Command line round trip
#
# The same steps as the other scripts, through the `gecforge` entry point. Every
# command writes a manifest next to its output so runs can be traced back to
# their inputs and settings.

# %%
import json
import tempfile
from pathlib import Path

from gecforge.cli import main

work = Path(tempfile.mkdtemp())
(work / "src.txt").write_text("他很高兴的说\n我昨天去了图书馆看书了很多\n", encoding="utf-8")
(work / "ref.txt").write_text("他很高兴地说\n我昨天去图书馆看了很多书\n", encoding="utf-8")
(work / "hyp.txt").write_text("他很高兴地说吧\n我昨天去图书馆看书很多\n", encoding="utf-8")

# %%
main(["extract-edits", "--src", str(work / "src.txt"), "--tgt", str(work / "ref.txt"), "--out", str(work / "gold.m2")])
print((work / "gold.m2").read_text(encoding="utf-8"))

# %%
main(["score", "--gold", str(work / "gold.m2"), "--hyp", str(work / "hyp.txt"), "--label", "toy"])

# %%
manifest = json.loads((work / "hyp.txt.score.json.manifest.json").read_text(encoding="utf-8"))
print(json.dumps(manifest, indent=2, ensure_ascii=False))
