"""Two-year observation window shared across modules.

Durations are recorded in whole days.  Day 0 means the event happened
within the last 24 hours; day 729 is the last observable value; day 730
is the exclusion boundary, where every density in the package is pinned
to zero.
"""

LAST_DAY = 729
NUM_DAYS = 730
