"""Regenerate the bundled toy corpus under tests/data/toy/.

Twelve retained users in three interest groups (futuretech, greenenergy,
spacenews) comment mostly on their own group's posts, so the pipeline should
find three clusters.  The corpus also carries one of everything the pruning
and parsing paths handle: short comments, deletion sentinels, a dangling
parent, reply chains that cascade away, users below the activity floor, an
unrated-domain group, and posts that end up empty.

Run from the repository root: python3 scripts/make_toy_fixture.py
"""

import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "tests" / "data" / "toy"

T2016 = 1451606400  # 2016-01-01 00:00:00 UTC
T2017 = 1483228800  # 2017-01-01 00:00:00 UTC
DAY = 86400

GROUPS = {
    "A": {
        "subreddit": "futuretech",
        "users": ["ava", "arun", "amber", "aldo"],
        "domains": [
            ("solarwire.example", "https://www.solarwire.example/story-{n}"),
            ("gridwatch.example", "https://feeds.gridwatch.example/item/{n}"),
            ("chronicle-labs.example", "https://chronicle-labs.example/report/{n}"),
        ],
    },
    "B": {
        "subreddit": "greenenergy",
        "users": ["bella", "boris", "bruna", "bo"],
        "domains": [
            ("patriotpulse.example", "https://patriotpulse.example/read/{n}"),
            ("truthhammer.example", "https://truthhammer.example/{n}"),
        ],
    },
    "C": {
        "subreddit": "spacenews",
        "users": ["cora", "carl", "cleo", "cliff"],
        "domains": [
            ("orbitreport.example", "https://orbitreport.example:8443/wire/{n}"),
            ("starbeacon.example", "https://starbeacon.example/sky/{n}"),
            ("deepfield.example", "https://deepfield.example/obs/{n}"),  # unrated
            (None, None),  # self post, no url
        ],
    },
}

TITLE_WORDS = {
    "A": ["battery", "microgrid", "storage", "inverter", "rollout", "pilot", "efficiency", "retrofit"],
    "B": ["subsidy", "mandate", "tariff", "repeal", "carbon", "quota", "lobby", "audit"],
    "C": ["orbit", "launch", "probe", "telescope", "flyby", "lander", "spectrum", "transit"],
}

FILLER = [
    "the numbers in this one hold up well",
    "context from last year makes this clearer",
    "worth reading the methodology section closely",
    "the local angle is underreported here",
    "good sourcing throughout the piece",
    "this matches what the operators reported",
    "the timeline in the article checks out",
    "independent measurements agree with this",
    "the headline oversells it a bit but the data is sound",
    "follow the linked filings for the details",
]

SHORT_BODIES = ["lol", "this.", "came here to say this", "nah", "big if true", "^ this"]


def main():
    rng = random.Random(42)
    OUT.mkdir(parents=True, exist_ok=True)

    posts = []
    comments = []
    post_meta = {}

    def add_post(pid, group, domain_idx, year_ts, n):
        g = GROUPS[group]
        words = TITLE_WORDS[group]
        title = f"New {rng.choice(words)} {rng.choice(['data', 'plan', 'results', 'review'])} for the {rng.choice(words)} program, part {n}"
        domain, url_tpl = g["domains"][domain_idx % len(g["domains"])]
        record = {
            "id": pid,
            "subreddit": g["subreddit"],
            "title": title,
            "created_utc": year_ts + (7 * n + domain_idx) * DAY,
        }
        if url_tpl:
            record["url"] = url_tpl.format(n=n)
        posts.append(record)
        post_meta[pid] = {"group": group, "domain": domain, "title": title}

    # ten posts per group; group C rotates through rated, unrated and no-url sources
    for gi, group in enumerate(["A", "B", "C"]):
        for n in range(10):
            add_post(f"p{group}{n:02d}", group, n, T2016 if n < 7 else T2017, n)

    # a post whose title is a deletion sentinel (skipped at parse time)
    posts.append({"id": "pDEL", "subreddit": "futuretech", "title": "[deleted]", "created_utc": T2016 + 40 * DAY})
    # a post that will lose its only comments to pruning
    posts.append({"id": "pEMPTY", "subreddit": "spacenews", "title": "Open thread for stray observations this week", "created_utc": T2016 + 50 * DAY})
    # a post with no comments at all
    posts.append({"id": "pBARE", "subreddit": "greenenergy", "title": "Weekly link roundup for policy watchers everywhere", "created_utc": T2016 + 60 * DAY})

    counter = [0]

    def add_comment(cid, pid, parent, author, body, ts):
        comments.append(
            {
                "id": cid,
                "link_id": pid,
                "parent_id": parent,
                "author": author,
                "body": body,
                "created_utc": ts,
            }
        )

    def next_id():
        counter[0] += 1
        return f"c{counter[0]:04d}"

    def marker_body(marker):
        tail = rng.choice(FILLER)
        return f"{marker} {tail}" if marker else tail

    # Group A: favor their posts (high credibility, low bias sources).
    # ava carries the heavy-2016 / light-2017 activity pattern.
    plan_2016 = {"ava": 28, "arun": 26, "amber": 24, "aldo": 27}
    plan_2017 = {"ava": 5, "arun": 2, "amber": 3, "aldo": 0}
    a_posts_2016 = [f"pA{n:02d}" for n in range(7)]
    a_posts_2017 = [f"pA{n:02d}" for n in range(7, 10)]
    for user, n16 in plan_2016.items():
        for i in range(n16):
            pid = a_posts_2016[i % len(a_posts_2016)]
            marker = "AGREE:" if i % 5 != 4 else ""
            add_comment(next_id(), pid, pid, user, marker_body(marker), T2016 + (30 + 2 * i) * DAY + counter[0])
        for i in range(plan_2017[user]):
            pid = a_posts_2017[i % len(a_posts_2017)]
            add_comment(next_id(), pid, pid, user, marker_body("AGREE:"), T2017 + (20 + 3 * i) * DAY + counter[0])

    # Group B: favor the patriotpulse posts, stay neutral on truthhammer,
    # which gives them strong positive bias and low credibility.
    b_pulse = [f"pB{n:02d}" for n in range(10) if n % 2 == 0]
    b_hammer = [f"pB{n:02d}" for n in range(10) if n % 2 == 1]
    for user in GROUPS["B"]["users"]:
        for i in range(20):
            pid = b_pulse[i % len(b_pulse)]
            add_comment(next_id(), pid, pid, user, marker_body("AGREE:"), T2016 + (25 + 2 * i) * DAY + counter[0])
        for i in range(8):
            pid = b_hammer[i % len(b_hammer)]
            add_comment(next_id(), pid, pid, user, marker_body(""), T2016 + (95 + 4 * i) * DAY + counter[0])

    # Group C: mixed stances on space coverage; cliff sticks to the posts
    # without ratings, so he ends up with no credibility or bias at all.
    c_rated = [f"pC{n:02d}" for n in range(10) if post_meta[f"pC{n:02d}"]["domain"] in ("orbitreport.example", "starbeacon.example")]
    c_unrated = [f"pC{n:02d}" for n in range(10) if post_meta[f"pC{n:02d}"]["domain"] not in ("orbitreport.example", "starbeacon.example")]
    for user in ["cora", "carl", "cleo"]:
        for i in range(18):
            pid = c_rated[i % len(c_rated)]
            marker = ["AGREE:", "AGREE:", "DISAGREE:", ""][i % 4]
            add_comment(next_id(), pid, pid, user, marker_body(marker), T2016 + (35 + 2 * i) * DAY + counter[0])
        for i in range(7):
            pid = c_unrated[i % len(c_unrated)]
            add_comment(next_id(), pid, pid, user, marker_body("AGREE:"), T2016 + (90 + 2 * i) * DAY + counter[0])
    for i in range(22):
        pid = c_unrated[i % len(c_unrated)]
        add_comment(next_id(), pid, pid, "cliff", marker_body("AGREE:" if i % 2 == 0 else ""), T2016 + (45 + 2 * i) * DAY + counter[0])

    # a few neutral visits across group lines keep the affinity graph connected
    cross = [("ava", "pB02"), ("bella", "pC00"), ("cora", "pA03"), ("arun", "pC02"),
             ("boris", "pA05"), ("carl", "pB04"), ("amber", "pB06"), ("bruna", "pC04"), ("cleo", "pA01")]
    for user, pid in cross:
        add_comment(next_id(), pid, pid, user, marker_body(""), T2016 + 150 * DAY + counter[0])

    # reply chains: disagreement with a disagreement reads as agreement,
    # and a neutral link absorbs everything below it
    root = next_id()
    add_comment(root, "pA00", "pA00", "ava", marker_body("AGREE:"), T2016 + 200 * DAY)
    reply = next_id()
    add_comment(reply, "pA00", root, "arun", marker_body("DISAGREE:"), T2016 + 201 * DAY)
    deep = next_id()
    add_comment(deep, "pA00", reply, "amber", marker_body("DISAGREE:"), T2016 + 202 * DAY)
    neutral = next_id()
    add_comment(neutral, "pB00", "pB00", "bella", marker_body(""), T2016 + 203 * DAY)
    under_neutral = next_id()
    add_comment(under_neutral, "pB00", neutral, "boris", marker_body("AGREE:"), T2016 + 204 * DAY)
    # a four-deep chain whose middle neutral absorbs the rest
    c_root = next_id()
    add_comment(c_root, "pC00", "pC00", "cora", marker_body("AGREE:"), T2016 + 205 * DAY)
    c_mid = next_id()
    add_comment(c_mid, "pC00", c_root, "carl", marker_body("DISAGREE:"), T2016 + 206 * DAY)
    c_quiet = next_id()
    add_comment(c_quiet, "pC00", c_mid, "cleo", marker_body(""), T2016 + 207 * DAY)
    add_comment(next_id(), "pC00", c_quiet, "cora", marker_body("DISAGREE:"), T2016 + 208 * DAY)
    # and a chain where two disagreements cancel back to favor
    b_root = next_id()
    add_comment(b_root, "pB02", "pB02", "bruna", marker_body("AGREE:"), T2016 + 209 * DAY)
    b_mid = next_id()
    add_comment(b_mid, "pB02", b_root, "bo", marker_body("DISAGREE:"), T2016 + 210 * DAY)
    add_comment(next_id(), "pB02", b_mid, "bella", marker_body("DISAGREE:"), T2016 + 211 * DAY)

    # pruning fodder -----------------------------------------------------
    # dave never clears the ten-comment activity floor
    for i in range(8):
        add_comment(next_id(), f"pA{i % 7:02d}", f"pA{i % 7:02d}", "dave", marker_body("AGREE:"), T2016 + (70 + i) * DAY)
    # erin is busy overall but never inside a single year
    for i in range(9):
        add_comment(next_id(), f"pC{i % 10:02d}", f"pC{i % 10:02d}", "erin", marker_body(""), T2016 + (80 + i) * DAY)
    for i in range(9):
        add_comment(next_id(), f"pC{i % 10:02d}", f"pC{i % 10:02d}", "erin", marker_body(""), T2017 + (80 + i) * DAY)
    # fran lurks in greenenergy but never says enough to stay
    for i in range(7):
        add_comment(next_id(), f"pB{i % 10:02d}", f"pB{i % 10:02d}", "fran", marker_body(""), T2016 + (85 + i) * DAY)
    # short comments vanish, and whatever replied to them cascades away
    short_root = next_id()
    add_comment(short_root, "pA01", "pA01", "aldo", rng.choice(SHORT_BODIES), T2016 + 210 * DAY)
    cascade_mid = next_id()
    add_comment(cascade_mid, "pA01", short_root, "amber", marker_body("AGREE:"), T2016 + 211 * DAY)
    cascade_leaf = next_id()
    add_comment(cascade_leaf, "pA01", cascade_mid, "arun", marker_body("DISAGREE:"), T2016 + 212 * DAY)
    for i in range(3):
        add_comment(next_id(), f"pB{i:02d}", f"pB{i:02d}", GROUPS["B"]["users"][i], rng.choice(SHORT_BODIES), T2016 + (215 + i) * DAY)
    for i in range(6):
        user = GROUPS["ABC"[i % 3]]["users"][i % 4]
        pid = f"p{'ABC'[i % 3]}{i % 7:02d}"
        add_comment(next_id(), pid, pid, user, rng.choice(SHORT_BODIES), T2016 + (230 + i) * DAY)
    # deletion sentinels are skipped quietly
    add_comment(next_id(), "pA02", "pA02", "ava", "[deleted]", T2016 + 220 * DAY)
    add_comment(next_id(), "pC01", "pC01", "cora", "[removed]", T2016 + 221 * DAY)
    # a reply to a comment that does not exist
    add_comment(next_id(), "pA03", "c9999", "aldo", marker_body("AGREE:"), T2016 + 222 * DAY)
    # a comment pointing at a post nobody ingested
    add_comment(next_id(), "pZZ99", "pZZ99", "bella", marker_body(""), T2016 + 223 * DAY)
    # a reply that crosses posts: root lives on pA00 but this claims pA04
    add_comment(next_id(), "pA04", root, "boris", marker_body(""), T2016 + 224 * DAY)
    # pEMPTY only ever collects short comments, so it prunes to nothing
    for i in range(2):
        add_comment(next_id(), "pEMPTY", "pEMPTY", "cleo", rng.choice(SHORT_BODIES), T2016 + (225 + i) * DAY)

    ratings_rows = [
        ("solarwire.example", 52, -6),
        ("gridwatch.example", 48, 4),
        ("chronicle-labs.example", 56, -2),
        ("patriotpulse.example", 18, 38),
        ("truthhammer.example", 12, -35),
        ("orbitreport.example", 44, 2),
        ("starbeacon.example", 30, 20),
        ("heliograph.example", 60, 0),
    ]

    subjects = ["the reactor", "the probe", "the grid", "the rover", "the survey", "the array",
                "the shipment", "the audit", "the permit", "the trial"]
    verbs = [("passed", "failed"), ("arrived", "never arrived"), ("stayed online", "went dark"),
             ("met the deadline", "missed the deadline"), ("cleared review", "was rejected")]
    places = ["in the northern district", "after the storm", "during the test window",
              "this quarter", "despite the delays", "under the new rules", "at the coastal site", "overnight"]
    triplets = []
    for i in range(40):
        subject = subjects[i % len(subjects)]
        verb_pos, verb_neg = verbs[(i // len(subjects)) % len(verbs)]
        place = places[i % len(places)]
        triplets.append(
            {
                "premise": f"{subject.capitalize()} {verb_pos} {place}.",
                "entailment": f"Reports confirm {subject} {verb_pos} {place}.",
                "negation": f"{subject.capitalize()} {verb_neg} {place}.",
            }
        )

    with open(OUT / "posts.jsonl", "w", encoding="utf-8") as fh:
        for p in posts:
            fh.write(json.dumps(p, sort_keys=True) + "\n")
    with open(OUT / "comments.jsonl", "w", encoding="utf-8") as fh:
        for c in comments:
            fh.write(json.dumps(c, sort_keys=True) + "\n")
    with open(OUT / "ratings.csv", "w", encoding="utf-8") as fh:
        fh.write("domain,reliability,bias\n")
        for domain, rel, bias in ratings_rows:
            fh.write(f"{domain},{rel},{bias}\n")
    with open(OUT / "triplets.jsonl", "w", encoding="utf-8") as fh:
        for t in triplets:
            fh.write(json.dumps(t, sort_keys=True) + "\n")
    config = """\
paths:
  posts: posts.jsonl
  comments: comments.jsonl
  ratings: ratings.csv
  triplets: triplets.jsonl
  out_dir: out
provider:
  kind: mock
embedding:
  dim: 16
pruning:
  min_words: 3
  min_user_comments: 10
  year_mode: any
ratings:
  mode: raw
negation:
  ridge_lambda: 1.0e-06
  train_fraction: 0.9
stance:
  mode: chain
clustering:
  neighbor_k: 7
  k_min: 2
  k_max: 8
  assignment: rotation
thresholds:
  high_bias: 0.5
  low_cred: 0.5
seed: 42
workers: 1
"""
    (OUT / "toy.yaml").write_text(config, encoding="utf-8")
    print(f"wrote {len(posts)} posts, {len(comments)} comments, {len(ratings_rows)} ratings, {len(triplets)} triplets to {OUT}")


if __name__ == "__main__":
    main()
