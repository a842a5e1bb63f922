LINES = []


def verdict(n, title, ok, detail=""):
    line = "criterion %2d %-28s %s  %s" % (n, title, "PASS" if ok else "FAIL", detail)
    LINES.append(line.rstrip())
    print(line.rstrip(), flush=True)
    return ok
