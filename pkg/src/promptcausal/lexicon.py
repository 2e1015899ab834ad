"""Bundled word lists backing the deterministic tokenizer and features.

Closed-class lists (determiners, pronouns, prepositions) drive tagging;
the verb list covers common base/irregular forms, including the verbs
that dominate programming-question phrasing; the frequency table is a
coarse Zipf-style familiarity score for frequent English words. All
lists are frozen so feature extraction is reproducible across machines.
"""

from __future__ import annotations

DETERMINERS = frozenset(
    """
    a an the this that these those each every either neither some any no
    all both few many much several most other another such what which
    whose enough
    """.split()
)

PRONOUNS = frozenset(
    """
    i you he she it we they me him her us them my your his its our their
    mine yours hers ours theirs myself yourself himself herself itself
    ourselves yourselves themselves who whom someone anyone everyone
    nobody somebody anybody everybody something anything everything
    nothing one
    """.split()
)

PREPOSITIONS = frozenset(
    """
    of in to for with on at by from up about into over after under above
    between through during before against among throughout despite
    towards toward upon concerning off within without along across
    behind beyond near outside inside onto per via until since
    """.split()
)

CONJUNCTIONS = frozenset("and or but nor so yet".split())

# Subordinators and complementizers that open dependent clauses; used
# by the clause-marker count feature.
CLAUSE_MARKERS = frozenset(
    """
    because although though while if unless whereas whenever wherever
    since until when where after before that whether once
    """.split()
)

AUXILIARIES = frozenset(
    """
    is are was were be been being am do does did done have has had can
    could will would shall should may might must
    """.split()
)

# Base forms, common irregular pasts, and verbs frequent in programming
# questions. Third-person -s and -ed/-ing forms are handled by suffix
# heuristics on top of this list.
VERBS = frozenset(
    """
    accept add answer appear apply ask assume become begin believe bring
    build buy calculate call change check choose come compute consider
    contain convert count create decide define delete denote describe
    determine display divide draw eat end ensure enter exist expect
    explain fail fall feel find finish fix follow form get give go
    happen hear help hold identify ignore implement include increase
    input insert iterate keep know learn leave let like list live look
    loop make mean meet move multiply need note obtain occur open output
    parse pass perform pick place play print process produce provide
    put read receive reduce remain remember remove repeat replace report
    represent require return reverse run satisfy say see seem select
    sell send set show simplify sit solve sort split stand start state
    stop store subtract sum suppose take tell terminate test think try
    turn update use validate verify want write yield
    began begun bought brought came chose chosen did done drew drawn ate
    eaten fell fallen felt found gave given went gone got gotten heard
    held kept knew known left lost made meant met moved put ran read
    said sat saw seen sent sold spoke spoken split stood took taken told
    thought wrote written
    """.split()
)

NUMBER_WORDS = frozenset(
    """
    zero one two three four five six seven eight nine ten eleven twelve
    thirteen fourteen fifteen sixteen seventeen eighteen nineteen twenty
    thirty forty fifty sixty seventy eighty ninety hundred thousand
    million billion first second third fourth fifth sixth seventh eighth
    ninth tenth
    """.split()
)

# Frequent given names and org-style tokens; a capitalized mid-sentence
# hit on this list is always an entity even if it shadows another list.
GAZETTEER = frozenset(
    """
    alice bob carol dave eve frank grace heidi mallory oscar peggy trent
    victor wendy john mary james linda robert patricia michael jennifer
    william elizabeth david susan richard jessica joseph sarah thomas
    karen anna tom jerry sam max python java london paris tokyo
    """.split()
)

# Coarse familiarity scores on a 1-7 scale (7 = most familiar), loosely
# following Zipf bands of general English. Words absent from the table
# get FAMILIARITY_FLOOR.
FAMILIARITY_FLOOR = 1.0

_BAND_7 = """
the be to of and a in that have it for not on with he as you do at this
but his by from they we say her she or an will my one all would there
their what so up out if about who get which go me
""".split()

_BAND_6 = """
when make can like time no just him know take people into year your
good some could them see other than then now look only come its over
think also back after use two how our work first well way even new want
because any these give day most us is are was were
""".split()

_BAND_5 = """
number part sound great small large place turn same right left old tell
follow came show around form three set put end does another big must
such here why ask went men read need land different home move try kind
hand picture again change off play spell air away animal house point
page letter mother answer found study still learn should world high
every near add food between own below country plant last school father
keep tree never start city earth eye light thought head under story saw
far sea draw while might close something seem next hard open example
begin life always those both paper together got group often run
""".split()

_BAND_4 = """
important until children side feet car mile night walk white sea grow
river four carry state once book hear stop without second later miss
idea enough eat face watch really almost let above girl sometimes
mountain cut young talk soon list song being leave family word string
integer program code line return print value list input output function
given contains array element character digit
""".split()

_BAND_3 = """
compute calculate determine maximum minimum sequence length separate
consider multiple specific require task solve test case whitespace
consecutive distinct ascending descending positive negative remainder
quotient iterate append substring vowel consonant palindrome factorial
""".split()

FAMILIARITY: dict[str, float] = {}
for _band, _words in ((7.0, _BAND_7), (6.0, _BAND_6), (5.0, _BAND_5), (4.0, _BAND_4), (3.0, _BAND_3)):
    for _w in _words:
        FAMILIARITY.setdefault(_w, _band)


def familiarity(word: str) -> float:
    """Familiarity score of a word, FAMILIARITY_FLOOR when unlisted."""
    return FAMILIARITY.get(word.lower(), FAMILIARITY_FLOOR)
