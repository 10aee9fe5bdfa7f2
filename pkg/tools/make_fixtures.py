"""Regenerate the bundled mini-corpus and its two response sets.

Run from the repository root:  python3 tools/make_fixtures.py
Writes src/wfsynth/data/mini_corpus.json, data/responses/perfect and data/responses/seeded.
"""

from __future__ import annotations

import copy
import json
import shutil
from pathlib import Path

DATA = Path(__file__).resolve().parent.parent / "src" / "wfsynth" / "data"


def node(id_, kind, parent=None, **params):
    rec = {"id": id_, "type": kind, "params": params}
    if parent is not None:
        rec["parent_id"] = parent
    return rec


def chain(*ids):
    return [[a, 0, b] for a, b in zip(ids, ids[1:])]


def start(*variables):
    return node("1", "start", variables=[{"name": n, "type": t} for n, t in variables])


def end(id_, **outputs):
    return node(id_, "end", outputs=[{"name": n, "value": v} for n, v in outputs.items()])


def var(name, type_, extensions=None):
    out = {"name": name, "type": type_}
    if extensions:
        out["extensions"] = extensions
    return out


def response(nodes, edges, principle, selection=None):
    kinds = []
    for n in nodes:
        if n["type"] not in kinds:
            kinds.append(n["type"])
    workflow = json.dumps({"nodes_info": nodes, "edges": edges}, indent=2, ensure_ascii=False)
    return (
        f"<node_selection>\n{', '.join(selection or kinds)}\n</node_selection>\n"
        f"<design_principle>\n{principle}\n</design_principle>\n"
        f"<workflow>\n{workflow}\n</workflow>\n"
    )


# ---------------------------------------------------------------- study planner

SP_TOPICS = ["Python", "Linear Algebra", "World History"]


def sp_round1():
    nodes = [start(("topic", "string")),
             node("2", "llm", prompt="Write a study plan for {{#1.topic#}}."),
             end("3", plan="{{#2.text#}}")]
    return nodes, chain("1", "2", "3")


SP_SPLIT = (
    "def main(syllabus: str) -> dict:\n"
    "    lines = [line.strip() for line in syllabus.splitlines()]\n"
    "    return {\"chapters\": [line for line in lines[1:] if line]}\n"
)


def sp_round2():
    nodes = [
        start(("topic", "string")),
        node("2", "llm", prompt="List the chapters for {{#1.topic#}}, one per line:\nFoundations\nCore Methods\nApplications"),
        node("3", "code", script=SP_SPLIT, variables=[{"name": "syllabus", "value": "{{#2.text#}}"}],
             outputs=[{"name": "chapters", "type": "array[string]"}]),
        node("4", "iteration", iterator="{{#3.chapters#}}", output_selector="{{#4-2.text#}}"),
        node("4-1", "iteration-start", parent="4"),
        node("4-2", "llm", parent="4", prompt="Write the tutorial section '{{#4.item#}}'."),
        node("5", "template-transform", template="# {{#1.topic#}} tutorial\n\n{{#4.output#}}"),
        end("6", tutorial="{{#5.output#}}"),
    ]
    return nodes, chain("1", "2", "3", "4", "5", "6") + [["4-1", 0, "4-2"]]


def sp_round3():
    nodes, edges = sp_round2()
    nodes = nodes[:-1] + [
        node("7", "markdown-exporter", md_text="{{#5.output#}}", format="pdf"),
        end("6", tutorial="{{#5.output#}}", pdf_file="{{#7.files#}}"),
    ]
    edges = [e for e in edges if e != ["5", 0, "6"]] + chain("5", "7", "6")
    return nodes, edges


STUDY_PLANNER = {
    "id": "study-planner",
    "domain": "Education",
    "description": "Turns a topic into a study plan, then a chaptered tutorial, then a PDF.",
    "rounds": [
        {
            "instruction": "Build a workflow that takes a learning topic and writes a study plan for it. "
                           "Output the plan as 'plan'.",
            "reference_vars": {"inputs": [var("topic", "string")], "outputs": [var("plan", "string")]},
            "key_nodes": ["llm"],
            "test_cases": [{"input": {"topic": t}, "ref_output": f"study plan for {t}."} for t in SP_TOPICS],
        },
        {
            "instruction": "Now list the chapters of the topic, write a tutorial section for every chapter "
                           "inside an iteration, and join the sections into one tutorial output as 'tutorial'.",
            "reference_vars": {"inputs": [var("topic", "string")], "outputs": [var("tutorial", "string")]},
            "key_nodes": ["iteration", "template-transform"],
            "test_cases": [{"input": {"topic": t}, "ref_output": f"{t} tutorial\n\nWrite the tutorial section 'Foundations'."}
                           for t in SP_TOPICS],
        },
        {
            "instruction": "Also export the tutorial as a PDF document output as 'pdf_file', keeping the text output.",
            "reference_vars": {"inputs": [var("topic", "string")],
                               "outputs": [var("tutorial", "string"), var("pdf_file", "array[file]", [".pdf"])]},
            "key_nodes": ["markdown-exporter"],
            "test_cases": [{"input": {"topic": t}, "ref_output": f"# {t} tutorial"}
                           for t in SP_TOPICS],
        },
    ],
}

# ---------------------------------------------------------------- deep research

DR_QUESTIONS = ["solid-state batteries", "CRISPR off-target effects", "quantum error correction"]


def dr_round1():
    nodes = [start(("question", "string")),
             node("2", "google-search", query="{{#1.question#}}"),
             node("3", "llm", prompt="Summarize the findings for '{{#1.question#}}':\n{{#2.text#}}"),
             end("4", report="{{#3.text#}}")]
    return nodes, chain("1", "2", "3", "4")


DR_QUERIES = (
    "def main(question: str) -> dict:\n"
    "    aspects = [\"overview\", \"recent advances\", \"open problems\"]\n"
    "    return {\"queries\": [question + \" \" + a for a in aspects]}\n"
)


def dr_round2():
    nodes = [
        start(("question", "string")),
        node("2", "code", script=DR_QUERIES, variables=[{"name": "question", "value": "{{#1.question#}}"}],
             outputs=[{"name": "queries", "type": "array[string]"}]),
        node("3", "iteration", iterator="{{#2.queries#}}", output_selector="{{#3-2.text#}}"),
        node("3-1", "iteration-start", parent="3"),
        node("3-2", "google-search", parent="3", query="{{#3.item#}}"),
        node("4", "llm", prompt="Write a research report on '{{#1.question#}}' from these results:\n{{#3.output#}}"),
        end("5", report="{{#4.text#}}"),
    ]
    return nodes, chain("1", "2", "3", "4", "5") + [["3-1", 0, "3-2"]]


DEEP_RESEARCH = {
    "id": "deep-research",
    "domain": "Research",
    "description": "Searches the web for a question and writes a report.",
    "rounds": [
        {
            "instruction": "Build a workflow that searches the web for a research question and summarizes "
                           "the findings as 'report'.",
            "reference_vars": {"inputs": [var("question", "string")], "outputs": [var("report", "string")]},
            "key_nodes": ["google-search", "llm"],
            "test_cases": [{"input": {"question": q}, "ref_output": f"Search results for: {q}"}
                           for q in DR_QUESTIONS],
        },
        {
            "instruction": "Expand the research: derive three sub-queries (overview, recent advances, open "
                           "problems), search each inside an iteration, and write the report from all results.",
            "reference_vars": {"inputs": [var("question", "string")], "outputs": [var("report", "string")]},
            "key_nodes": ["code", "iteration", "google-search"],
            "test_cases": [{"input": {"question": q}, "ref_output": f"Search results for: {q} open problems"}
                           for q in DR_QUESTIONS],
        },
    ],
}

# ---------------------------------------------------------------- contract review

CONTRACTS = [
    ("contract_a.txt", "Party: Acme Corp. Amount: 25000 USD. Term: 12 months.", "Acme Corp", 25000),
    ("contract_b.txt", "Party: Birch LLC. Amount: 4800 USD. Term: 6 months.", "Birch LLC", 4800),
    ("contract_c.txt", "Party: Cobalt Inc. Amount: 12500 USD. Term: 24 months.", "Cobalt Inc", 12500),
]


def cr_round1(prompt="Summarize the key terms of this contract:\n{{#2.text#}}"):
    nodes = [start(("contract", "file")),
             node("2", "document-extractor", file="{{#1.contract#}}"),
             node("3", "llm", prompt=prompt),
             end("4", summary="{{#3.text#}}")]
    return nodes, chain("1", "2", "3", "4")


def cr_round2(threshold=10000):
    nodes = [
        start(("contract", "file")),
        node("2", "document-extractor", file="{{#1.contract#}}"),
        node("3", "llm", prompt="Summarize the key terms of this contract:\n{{#2.text#}}"),
        node("4", "parameter-extractor", query="{{#2.text#}}",
             parameters=[{"name": "amount", "type": "number", "description": "contract amount in USD"}]),
        node("5", "if-else", conditions=[{"variable": "{{#4.amount#}}", "operator": ">", "value": threshold}]),
        node("6", "llm", prompt="Flag for legal review: high-value contract of {{#4.amount#}} USD."),
        node("7", "template-transform", template="Standard approval: contract of {{#4.amount#}} USD."),
        node("8", "variable-aggregator", variables=["{{#6.text#}}", "{{#7.output#}}"]),
        end("9", summary="{{#3.text#}}", review="{{#8.output#}}"),
    ]
    edges = chain("1", "2", "3", "4", "5") + [["5", 0, "6"], ["5", 1, "7"], ["6", 0, "8"], ["7", 0, "8"],
                                              ["8", 0, "9"]]
    return nodes, edges


def _review(amount):
    if amount > 10000:
        return f"legal review: high-value contract of {amount} USD."
    return f"Standard approval: contract of {amount} USD."


CONTRACT_REVIEW = {
    "id": "contract-review",
    "domain": "Document",
    "description": "Reads a contract file, summarizes it and routes it for approval.",
    "rounds": [
        {
            "instruction": "Create a workflow that reads an uploaded contract file and summarizes its key terms "
                           "as 'summary'.",
            "reference_vars": {"inputs": [var("contract", "file")], "outputs": [var("summary", "string")]},
            "key_nodes": ["document-extractor", "llm"],
            "test_cases": [{"input": {"contract": {"name": n, "content": c}}, "ref_output": f"Party: {p}."}
                           for n, c, p, _ in CONTRACTS],
        },
        {
            "instruction": "Extract the contract amount, flag contracts above 10000 USD for legal review, approve "
                           "the rest, and output the decision as 'review' next to 'summary'.",
            "reference_vars": {"inputs": [var("contract", "file")],
                               "outputs": [var("summary", "string"), var("review", "string")]},
            "key_nodes": ["parameter-extractor", "if-else", "variable-aggregator"],
            "test_cases": [{"input": {"contract": {"name": n, "content": c}}, "ref_output": _review(a)}
                           for n, c, _, a in CONTRACTS],
        },
    ],
}

# ---------------------------------------------------------------- support triage

TICKETS = [
    ("I was charged twice this month", "billing"),
    ("The app crashes when I log in", "technical"),
    ("Do you have an office in Berlin?", "general"),
]


def st_round1():
    nodes = [
        start(("ticket", "string")),
        node("2", "question-classifier", query="{{#1.ticket#}}", classes=["billing", "technical", "general"]),
        node("3", "llm", prompt="Draft a billing reply to: {{#1.ticket#}}"),
        node("4", "llm", prompt="Draft a technical reply to: {{#1.ticket#}}"),
        node("5", "llm", prompt="Draft a general reply to: {{#1.ticket#}}"),
        node("6", "variable-aggregator", variables=["{{#3.text#}}", "{{#4.text#}}", "{{#5.text#}}"]),
        end("7", reply="{{#6.output#}}"),
    ]
    edges = chain("1", "2") + [["2", 0, "3"], ["2", 1, "4"], ["2", 2, "5"],
                               ["3", 0, "6"], ["4", 0, "6"], ["5", 0, "6"], ["6", 0, "7"]]
    return nodes, edges


def st_round2(cyclic=False):
    nodes, edges = st_round1()
    nodes = nodes[:-1] + [
        node("8", "http-request", url="https://crm.example.com/api/tickets", method="POST",
             body="{\"ticket\": \"{{#1.ticket#}}\"}"),
        end("7", reply="{{#6.output#}}", status="{{#8.status_code#}}"),
    ]
    edges = [["1", 0, "8"], ["8", 0, "2"]] + edges[1:]
    if cyclic:
        edges.append(["6", 0, "8"])
    return nodes, edges


def _ticket_case(text, cls, extra=""):
    return {"input": {"ticket": text}, "ref_output": f"{cls} reply to: {text}{extra}",
            "scripts": [{"kind": "question-classifier", "class": cls}]}


SUPPORT_TRIAGE = {
    "id": "support-triage",
    "domain": "Enterprise",
    "description": "Classifies support tickets, drafts replies and logs them in a CRM.",
    "rounds": [
        {
            "instruction": "Route each support ticket to billing, technical or general handling with a classifier "
                           "and draft a reply as 'reply'.",
            "reference_vars": {"inputs": [var("ticket", "string")], "outputs": [var("reply", "string")]},
            "key_nodes": ["question-classifier", "variable-aggregator"],
            "test_cases": [_ticket_case(t, c) for t, c in TICKETS],
        },
        {
            "instruction": "Log every ticket in the CRM with an HTTP POST before routing it, and also output the "
                           "CRM status code as 'status'.",
            "reference_vars": {"inputs": [var("ticket", "string")],
                               "outputs": [var("reply", "string"), var("status", "number")]},
            "key_nodes": ["http-request", "question-classifier"],
            "scripts": [{"kind": "http-request", "digest": "*",
                         "outputs": {"status_code": 201, "body": "{\"id\": 7}"}}],
            "test_cases": [_ticket_case(t, c, "\n201") for t, c in TICKETS],
        },
    ],
}

# ---------------------------------------------------------------- code documentation

CD_SOURCES = [
    ("def parse(text):\n    return text\n\ndef render(tree):\n    return str(tree)\n",
     ["parse", "render"]),
    ("import os\n\ndef main():\n    print(os.getcwd())\n", ["main"]),
    ("class Worker:\n    def run(self):\n        pass\n\n    def stop(self):\n        pass\n\n"
     "def helper(x):\n    return x\n", ["run", "stop", "helper"]),
]

CD_SCAN = (
    "def main(source: str) -> dict:\n"
    "    names = []\n"
    "    for line in source.splitlines():\n"
    "        stripped = line.strip()\n"
    "        if stripped.startswith(\"def \"):\n"
    "            names.append(stripped[4:].split(\"(\")[0])\n"
    "    return {\"functions\": names, \"count\": len(names), \"lines\": len(source.splitlines())}\n"
)

CD_OUTPUTS = [{"name": "functions", "type": "array[string]"}, {"name": "count", "type": "number"},
              {"name": "lines", "type": "number"}]


def cd_base():
    return [
        start(("source", "string")),
        node("2", "code", script=CD_SCAN, variables=[{"name": "source", "value": "{{#1.source#}}"}],
             outputs=CD_OUTPUTS),
        node("3", "template-transform", template="Found {{#2.count#}} functions:\n{{#2.functions#}}"),
        node("4", "llm", prompt="Write reference documentation for the following.\n{{#3.output#}}"),
    ]


def cd_round1():
    return cd_base() + [end("5", doc="{{#4.text#}}")], chain("1", "2", "3", "4", "5")


def cd_round2(renderer="mermaid-converter"):
    if renderer == "mermaid-converter":
        draw = node("7", "mermaid-converter", mermaid_code="{{#6.output#}}")
    else:
        draw = node("7", "text-to-image", prompt="{{#6.output#}}")
    nodes = cd_base() + [
        node("6", "template-transform", template="graph TD\n{{#2.functions#}}"),
        draw,
        end("5", doc="{{#4.text#}}", diagram="{{#7.files#}}"),
    ]
    return nodes, chain("1", "2", "3", "4", "6", "7", "5")


def cd_round3():
    nodes = cd_base() + [
        node("6", "template-transform", template="graph TD\n{{#2.functions#}}"),
        node("7", "mermaid-converter", mermaid_code="{{#6.output#}}"),
        node("8", "list-operator", variable="{{#2.functions#}}", order="asc"),
        node("9", "echarts", chart_type="bar", data="{{#2.count#}};{{#2.lines#}}", x_axis="functions;lines",
             title="Code size"),
        end("5", doc="{{#4.text#}}", diagram="{{#7.files#}}", names="{{#8.result#}}", chart="{{#9.text#}}"),
    ]
    return nodes, chain("1", "2", "3", "4", "6", "7", "8", "9", "5")


CODE_DOC = {
    "id": "code-doc",
    "domain": "Developer",
    "description": "Documents Python source, draws its structure and charts its size.",
    "rounds": [
        {
            "instruction": "Given Python source code, list its functions with a code node and write "
                           "documentation for them as 'doc'.",
            "reference_vars": {"inputs": [var("source", "string")], "outputs": [var("doc", "string")]},
            "key_nodes": ["code", "llm"],
            "test_cases": [{"input": {"source": s}, "ref_output": f"Found {len(f)} functions:\n" + "\n".join(f)}
                           for s, f in CD_SOURCES],
        },
        {
            "instruction": "Also draw a Mermaid diagram with one box per function and output the image as "
                           "'diagram'.",
            "reference_vars": {"inputs": [var("source", "string")],
                               "outputs": [var("doc", "string"), var("diagram", "array[file]", [".png"])]},
            "key_nodes": ["mermaid-converter"],
            "test_cases": [{"input": {"source": s}, "ref_output": f"Found {len(f)} functions"}
                           for s, f in CD_SOURCES],
        },
        {
            "instruction": "Add the function names in alphabetical order as 'names' and a bar chart comparing the "
                           "function count with the number of source lines as 'chart'.",
            "reference_vars": {"inputs": [var("source", "string")],
                               "outputs": [var("doc", "string"), var("diagram", "array[file]", [".png"]),
                                           var("names", "array[string]"), var("chart", "string")]},
            "key_nodes": ["list-operator", "echarts"],
            "test_cases": [{"input": {"source": s}, "ref_output": "\n".join(sorted(f))} for s, f in CD_SOURCES],
        },
    ],
}

# ---------------------------------------------------------------- poster studio

THEMES = ["ocean cleanup", "city marathon", "spring festival"]


def ps_round1(audio_poster=False):
    nodes = [start(("theme", "string")),
             node("2", "llm", prompt="Write a vivid poster image prompt about {{#1.theme#}}."),
             node("3", "text-to-image", prompt="{{#2.text#}}")]
    if audio_poster:
        nodes += [node("5", "text-to-speech", text="{{#2.text#}}"), end("4", poster="{{#5.files#}}")]
        return nodes, chain("1", "2", "3", "5", "4")
    return nodes + [end("4", poster="{{#3.files#}}")], chain("1", "2", "3", "4")


def ps_round2():
    nodes = [start(("theme", "string")),
             node("2", "llm", prompt="Write a vivid poster image prompt about {{#1.theme#}}."),
             node("3", "text-to-image", prompt="{{#2.text#}}"),
             node("5", "llm", prompt="Write a one-line slogan about {{#1.theme#}}."),
             node("6", "text-to-speech", text="{{#5.text#}}"),
             end("4", poster="{{#3.files#}}", slogan="{{#5.text#}}", voice="{{#6.files#}}")]
    return nodes, chain("1", "2", "3", "5", "6", "4")


POSTER_STUDIO = {
    "id": "poster-studio",
    "domain": "AIGC",
    "description": "Generates a poster image, then adds a spoken slogan.",
    "rounds": [
        {
            "instruction": "Generate a poster image for a theme: write an image prompt with a model, render it, "
                           "and output the image as 'poster'.",
            "reference_vars": {"inputs": [var("theme", "string")],
                               "outputs": [var("poster", "array[file]", [".png"])]},
            "key_nodes": ["llm", "text-to-image"],
            "test_cases": [{"input": {"theme": t}, "ref_output": None} for t in THEMES],
        },
        {
            "instruction": "Also write a one-line slogan for the theme, output it as 'slogan', and read it aloud "
                           "as an audio file 'voice'.",
            "reference_vars": {"inputs": [var("theme", "string")],
                               "outputs": [var("poster", "array[file]", [".png"]), var("slogan", "string"),
                                           var("voice", "array[file]", [".mp3"])]},
            "key_nodes": ["text-to-speech"],
            "test_cases": [{"input": {"theme": t}, "ref_output": f"slogan about {t}."} for t in THEMES],
        },
    ],
}

TASKS = [STUDY_PLANNER, DEEP_RESEARCH, CONTRACT_REVIEW, SUPPORT_TRIAGE, CODE_DOC, POSTER_STUDIO]

PRINCIPLE = "Straight data flow from the start inputs to the end outputs; every reference points upstream."

PERFECT = {
    "study-planner": [sp_round1, sp_round2, sp_round3],
    "deep-research": [dr_round1, dr_round2],
    "contract-review": [cr_round1, cr_round2],
    "support-triage": [st_round1, st_round2],
    "code-doc": [cd_round1, cd_round2, cd_round3],
    "poster-studio": [ps_round1, ps_round2],
}


def perfect_responses():
    return {(tid, k + 1): response(*build(), PRINCIPLE) for tid, fns in PERFECT.items() for k, build in enumerate(fns)}


def seeded_responses():
    """One defect per listed subtask; the others are copied from the perfect set."""
    out = perfect_responses()
    # missing design_principle tag: fails at the format step
    text = out[("study-planner", 1)]
    out[("study-planner", 1)] = text.replace("<design_principle>", "").replace("</design_principle>", "")
    # output renamed: fails at the variables step
    nodes, edges = sp_round3()
    nodes = copy.deepcopy(nodes)
    nodes[-1]["params"]["outputs"][1]["name"] = "pdf"
    out[("study-planner", 3)] = response(nodes, edges, PRINCIPLE)
    # selection omits two used kinds: fails at the logic step
    nodes, edges = dr_round2()
    out[("deep-research", 2)] = response(nodes, edges, PRINCIPLE,
                                         selection=["start", "iteration", "google-search", "llm", "end"])
    # prompt drops the extracted text: passes, resolves no case
    out[("contract-review", 1)] = response(*cr_round1(prompt="Summarize the key terms of the contract."), PRINCIPLE)
    # wrong threshold: the 12500 contract is approved instead of flagged
    out[("contract-review", 2)] = response(*cr_round2(threshold=20000), PRINCIPLE)
    # back edge 6 -> 8: fails at the conversion step
    out[("support-triage", 2)] = response(*st_round2(cyclic=True), PRINCIPLE)
    # text-to-image instead of mermaid-converter: key node missing at the logic step
    out[("code-doc", 2)] = response(*cd_round2(renderer="text-to-image"), PRINCIPLE)
    # poster wired to the audio node: passes, every case has the wrong extension
    out[("poster-studio", 1)] = response(*ps_round1(audio_poster=True), PRINCIPLE)
    return out


def write_set(name, responses):
    root = DATA / "responses" / name
    if root.exists():
        shutil.rmtree(root)
    for (tid, k), text in responses.items():
        path = root / tid / f"round{k}.txt"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")


def main():
    corpus = {"version": 1, "tasks": TASKS}
    (DATA / "mini_corpus.json").write_text(json.dumps(corpus, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    write_set("perfect", perfect_responses())
    write_set("seeded", seeded_responses())


if __name__ == "__main__":
    main()
