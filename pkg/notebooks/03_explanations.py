# %% [markdown]
# # Explanation augmentation
#
# An LLM annotates each source sentence with error types, a corrected sentence
# and ranked explanations. The result is prepended to the source as the
# training input of a correction model.
#
# Nothing here touches the network: a scripted mock answers the prompts.

# %%
import json
import tempfile
from pathlib import Path

from gecforge import CorrectionSample
from gecforge.exam import ExamConfig, explain_request, parse_augmented, run_exam
from gecforge.llm import make_client

# %%
corpus = [
    CorrectionSample("a", "他去了学校了", ("他去了学校",)),
    CorrectionSample("b", "我很喜欢看书了", ("我很喜欢看书",)),
]


def answer(request):
    sentence = next(s for s in corpus if s.source in request.user_prompt)
    return json.dumps({
        "error_types": ["word errors"],
        "reference": sentence.references[0],
        "explanations": [{"rank": 1, "text": "句末的“了”多余"}],
    }, ensure_ascii=False)


# %% [markdown]
# By default the gold correction is not shown to the annotator.

# %%
client = make_client("scripted-mock", script=answer)
config = ExamConfig(client=client)
print(explain_request(corpus[0], config).user_prompt)

# %%
out = Path(tempfile.mkdtemp())
result = run_exam(corpus, config, out)
print((out / "augmented.tsv").read_text(encoding="utf-8"))

# %%
fields = parse_augmented(result.augmented[0].split("\t")[1])
print(fields)
