from pkg.models import User, load


async def run(path):
    users = load(path)
    return users


if __name__ == "__main__":
    COUNT = 3
