"""Edit the explained feature of a tabular instance until the label flips.

A toy "is this person a student?" classifier depends only on the age group.
An explanation that points at age group admits a one-edit counterfactual;
one that points at gender does not.
"""

import numpy as np

from cfeval import (
    Explanation,
    FeatureSchema,
    FeatureSpec,
    Instance,
    LogisticModel,
    discrete_search,
    encode,
    predict,
)

schema = FeatureSchema(
    [
        FeatureSpec.categorical("race", ["asian", "black", "white"]),
        FeatureSpec.categorical("gender", ["male", "female"]),
        FeatureSpec.categorical("agegroup", ["10-16", "17-34", "35-48", "49-90"]),
    ]
)

# weights live on the one-hot coordinates; only the youngest group says "student"
w = np.zeros(schema.width)
start, _ = schema.spans[2]
w[start:start + 4] = [3.0, -1.0, -2.0, -2.0]
model = LogisticModel(w, bias=0.0)

person = Instance((2, 1, 0))  # white, female, 10-16
pred = predict(model, encode(person, schema))
print(f"prediction: label={pred.label} p(student)={pred.probs[1]:.3f}")

for name, expl in [("agegroup", Explanation((2,))), ("gender", Explanation((1,)))]:
    res = discrete_search(model, schema, person, expl)
    edits = {schema[j].name: schema[j].value_label(v) for j, v in res.edited_values.items()}
    print(f"explanation={name:<9} flipped={res.flipped!s:<5} edits={edits} distance={res.distance:.4f}")

# a one-hot edit always moves the representation by sqrt(2)
print("sqrt(2) =", round(np.sqrt(2), 4))
