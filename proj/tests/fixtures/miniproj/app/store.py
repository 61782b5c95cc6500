"""In-memory inventory store with audit hooks."""


def audit_log(event, key):
    print("audit %s %s" % (event, key))


def delete_entry(items, key):
    items.pop(key, None)
    return len(items)


class InventoryStore:
    def __init__(self):
        self.items = {}
        self.deleted = 0

    def put(self, key, value):
        if key is None:
            raise ValueError("key required")
        self.items[key] = value
        audit_log("put", key)
        return value

    def get(self, key, default=None):
        return self.items.get(key, default)

    def remove(self, key):
        before = len(self.items)
        delete_entry(self.items, key)
        self.deleted += 1
        audit_log("remove", key)
        return before - len(self.items)

    def purge(self, keys):
        removed = []
        for key in keys:
            if key not in self.items:
                audit_log("skip", key)
                continue
            value = self.items.pop(key)
            removed.append((key, value))
        return removed

    def sweep(self):
        count = 0
        for key in sorted(list(self.items)):
            value = self.items[key]
            if value is None:
                self.deleted += 1
                audit_log("sweep", key)
                continue
            count += 1
        return count
