"""
Scoring a few sessions
======================

Each session pairs students, grades their sheets and shares a score inside
every pair. An odd student out keeps their grade but is left out of the
scores. Totals across sessions feed a leaderboard.
"""

# %%
from pdpl import SessionRecord, aggregate, score_session

sessions = [
    SessionRecord(1, pairs=(("ana", "ben"), ("cai", "dee")),
                  grades={"ana": 2.0, "ben": 0.0, "cai": 2.0, "dee": 2.0, "eli": 1.5}, unpaired="eli"),
    SessionRecord(2, pairs=(("ana", "cai"), ("ben", "eli")),
                  grades={"ana": 2.0, "cai": 1.5, "ben": 0.5, "eli": 2.0}),
]
sheets = [score_session(s) for s in sessions]

# %%
for sheet in sheets:
    print(f"session {sheet.session_index}")
    for sid, e in sorted(sheet.entries.items()):
        status = "excluded" if e.excluded else f"score {e.score:.2f}, payoff {e.payoff:+.2f}"
        print(f"  {sid}: grade {e.grade} -> {status}")

# %%
# ben free-rode on ana in session 1: same score, but ben's payoff is 1.2
# while ana's is -0.8.
standings = aggregate(sheets, top_k=3)
print("leaderboard:", standings.leaderboard)
for sid, t in sorted(standings.totals.items()):
    print(f"  {sid}: total {t.total_score:.2f}, payoff {t.total_payoff:+.2f}, absences {t.absences}")
