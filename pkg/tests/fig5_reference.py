"""Direct transliteration of the GAD recursion, kept independent of the
engine: it consumes a recorded transcript (comp-id sets, permutation, split
index, answer per event) and reproduces the final suspect set by plain set
algebra.  Used to check that the engine's bookkeeping is faithful."""


def gad_replay(initial_acc, events, epsilon, rules_of):
    acc = frozenset(initial_acc)
    correct = []
    for e in events:
        bug = acc
        for c in correct:
            bug = bug - c
        if len(rules_of(bug)) <= epsilon:
            return bug
        acc_prime = frozenset(e["acc"])
        correct = [correct[i] for i in e["perm"]]
        m, answer = e["m"], e["answer"]
        if answer == "correct":
            correct = [acc_prime] + correct[m:]
        elif answer == "wrong":
            acc, correct = acc_prime, correct[:m]
        elif answer.startswith("wrong_value"):
            acc = frozenset(e["slice"])
            correct = [c for c in correct if c <= acc]
        elif answer == "skip":
            pass
        elif answer == "abort":
            break
    bug = acc
    for c in correct:
        bug = bug - c
    return bug
