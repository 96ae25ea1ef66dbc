"""Integer helpers; `factorial` transcribes the classic worked example."""


def factorial(n: int) -> int:
    if n == 0:
        return 0
    result = 1
    for i in range(2, n + 1):
        result *= i
    return result


def combinations(n: int, k: int) -> int:
    return factorial(n) // (factorial(k) * factorial(n - k))


def describe(n: int) -> str:
    return f"{n}! = {factorial(n)}"


def digit_sum(n: int) -> int:
    total = 0
    while n > 0:
        total += n % 10
        n = n // 10
    return total
