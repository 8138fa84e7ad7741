# %% [markdown]
# # Judge-based evaluation
#
# Exact matching punishes valid corrections that differ from the reference. Here
# a judge model labels every predicted edit as correct, wrong or reasonable.
# Reasonable edits count neither for nor against the system.

# %%
import json

from gecforge import CorrectionSample, Prediction, score_corpus
from gecforge.llm import make_client
from gecforge.see import SeeConfig, run_see

# %%
corpus = [CorrectionSample("a", "他很高兴的说", ("他很高兴地说",))]
preds = [Prediction("a", "他很高兴地说吧")]

# edit 0 fixes 的 -> 地, edit 1 adds a sentence-final 吧
verdicts = json.dumps([
    {"edit_index": 0, "verdict": "CorrectEdit", "rationale": "matches the reference"},
    {"edit_index": 1, "verdict": "ReasonableEdit", "rationale": "optional particle"},
])
config = SeeConfig(client=make_client("scripted-mock", script=[verdicts]), judge_model="judge")
judged = run_see(corpus, preds, config)
print(judged.report.counts)

# %% [markdown]
# Exact matching counts the particle as a false positive. The judge does not.

# %%
exact = score_corpus(preds, corpus)
print("exact", round(exact.precision, 4), round(exact.recall, 4), round(exact.f_beta, 4))
print("judge", round(judged.report.precision, 4), round(judged.report.recall, 4), round(judged.report.f_beta, 4))
