"""Regenerates the bundled sample corpus (corpus.jsonl).

    python3 generate.py > corpus.jsonl
"""
import json
import random

rng = random.Random(20160101)

products = [
    "WebCalendar", "PHPNuke", "phpBB", "WordPress", "Joomla", "Drupal", "MyBB",
    "OpenSSL", "Apache HTTP Server", "Internet Explorer", "Firefox", "Safari",
    "Adobe Reader", "Flash Player", "Windows Media Player", "iTunes", "QuickTime",
    "Samba", "ProFTPD", "Sendmail", "BIND", "MySQL", "PostgreSQL", "Tomcat",
]
mobile_products = ["iPhone OS", "iOS", "Android", "WhatsApp Messenger", "BlackBerry OS"]
params = ["id", "user", "cat", "page", "search", "name", "sid", "query", "lang", "file"]
scripts = ["index.php", "admin.php", "login.php", "view.php", "search.php", "forum.php", "user.php"]
functions = ["parse_header", "read_packet", "decode_url", "copy_string", "load_image", "handle_request"]


def version():
    return "%d.%d.%d" % (rng.randint(0, 9), rng.randint(0, 20), rng.randint(0, 9))


def sql(_year):
    return rng.choice([
        "SQL injection vulnerability in {s} in {p} {v} allows remote attackers to execute arbitrary SQL commands via the {q} parameter.",
        "Multiple SQL injection vulnerabilities in {p} before {v} allow remote attackers to execute arbitrary SQL commands via the {q} parameter to {s}.",
        "SQL injection vulnerability in the {q} parameter of {s} in {p} {v} allows remote authenticated users to inject arbitrary SQL code and read database contents.",
        "{p} {v} does not properly sanitize the {q} parameter in {s}, which allows remote attackers to conduct SQL injection attacks and execute arbitrary commands.",
    ]).format(p=rng.choice(products), v=version(), s=rng.choice(scripts), q=rng.choice(params))


def xss(_year):
    return rng.choice([
        "Cross-site scripting (XSS) vulnerability in {s} in {p} {v} allows remote attackers to inject arbitrary web script or HTML via the {q} parameter.",
        "Multiple cross-site scripting (XSS) vulnerabilities in {p} before {v} allow remote attackers to inject arbitrary web script or HTML via the {q} parameter to {s}.",
        "Cross-site scripting vulnerability in the web interface of {p} {v} allows remote attackers to steal credentials via a crafted URL to the web server.",
    ]).format(p=rng.choice(products), v=version(), s=rng.choice(scripts), q=rng.choice(params))


def overflow(_year):
    return rng.choice([
        "Buffer overflow in the {f} function in {p} {v} allows remote attackers to execute arbitrary code via a long string.",
        "Stack-based buffer overflow in {p} before {v} allows remote attackers to cause a denial of service (crash) or execute arbitrary code via a crafted file.",
        "Heap-based buffer overflow in the {f} function in {p} {v} allows attackers to corrupt memory and execute arbitrary code.",
        "Integer overflow in the {f} function in {p} {v} leads to a heap-based buffer overflow that allows remote attackers to execute arbitrary code.",
    ]).format(p=rng.choice(products), v=version(), f=rng.choice(functions))


def mobile(year):
    p = rng.choice(mobile_products)
    if p.startswith("WhatsApp") and rng.random() < 0.5:
        p = "Watsapp Messenger"
    return rng.choice([
        "{p} before {v} allows attackers to bypass the lock screen on the device via a crafted sequence of gestures.",
        "The messaging component in {p} {v} allows remote attackers to execute arbitrary code or cause a denial of service (memory corruption) via a crafted message.",
        "{p} {v} does not properly validate certificates, which allows man-in-the-middle attackers to read encrypted traffic on the device.",
    ]).format(p=p, v=version())


def other(_year):
    return rng.choice([
        "Directory traversal vulnerability in {p} {v} allows remote attackers to read arbitrary files via a .. (dot dot) in the {q} parameter.",
        "{p} {v} allows local users to gain privileges via a symlink attack on a temporary file.",
        "Unspecified vulnerability in {p} before {v} has unknown impact and attack vectors.",
        "{p} {v} on Windows uses weak permissions for the svchost service configuration, which allows local users to gain privileges.",
    ]).format(p=rng.choice(products), v=version(), q=rng.choice(params))


def pick(year):
    weights = [
        (sql, 3 if 2004 <= year <= 2009 else 1),
        (xss, 3 if 2005 <= year <= 2012 else 1),
        (overflow, 3 if year <= 2006 else 2),
        (mobile, 4 if year >= 2009 else 0),
        (other, 2),
    ]
    fns, ws = zip(*weights)
    return rng.choices(fns, weights=ws)[0]


years = list(range(1999, 2017))
year_weights = [1 + (y - 1999) // 3 for y in years]
docs = []
for _ in range(200):
    year = rng.choices(years, weights=year_weights)[0]
    date = "%d-%02d-%02d" % (year, rng.randint(1, 12), rng.randint(1, 28))
    docs.append((date, pick(year)(year)))
docs.sort()
seq = {}
for date, text in docs:
    year = date[:4]
    seq[year] = seq.get(year, 0) + 1
    print(json.dumps({"id": "CVE-%s-%04d" % (year, seq[year]), "date": date, "description": text}))
